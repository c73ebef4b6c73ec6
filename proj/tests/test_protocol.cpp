#include <gtest/gtest.h>

#include <random>

#include "cepless/protocol.hpp"

using namespace cepless::protocol;

namespace {

std::vector<ParsedRequest> parse_all(std::string_view bytes, std::size_t chunk = 0) {
  RequestParser parser;
  std::vector<ParsedRequest> out;
  if (chunk == 0) chunk = bytes.size() + 1;
  for (std::size_t i = 0; i < bytes.size(); i += chunk) {
    parser.feed(bytes.substr(i, chunk));
    while (auto r = parser.next()) out.push_back(std::move(*r));
  }
  return out;
}

}  // namespace

TEST(Protocol, RequestBytes) {
  std::string out;
  append_request(out, {"PUSH", "q-in", "a\r\nb"});
  EXPECT_EQ(out, "*3\r\n$4\r\nPUSH\r\n$4\r\nq-in\r\n$4\r\na\r\nb\r\n");
}

TEST(Protocol, ReplyBytes) {
  EXPECT_EQ(to_string(Reply::ok()), "+OK\r\n");
  EXPECT_EQ(to_string(Reply::of_integer(-3)), ":-3\r\n");
  EXPECT_EQ(to_string(Reply::of_error("size")), "-ERR size\r\n");
  EXPECT_EQ(to_string(Reply::of_array({"a", ""})), "*2\r\n$1\r\na\r\n$0\r\n\r\n");
  EXPECT_EQ(to_string(Reply::of_array({})), "*0\r\n");
}

TEST(Protocol, ParsesAcrossArbitraryChunks) {
  std::mt19937_64 rng(5);
  std::vector<Request> requests;
  std::string wire;
  for (int i = 0; i < 200; ++i) {
    Request r;
    const std::size_t n = 1 + rng() % 4;
    for (std::size_t j = 0; j < n; ++j) {
      std::string arg(rng() % 40, '\0');
      for (auto& c : arg) c = static_cast<char>(rng());
      r.push_back(arg);
    }
    append_request(wire, r);
    requests.push_back(std::move(r));
  }
  for (std::size_t chunk : {1u, 2u, 7u, 64u, 100000u}) {
    const auto parsed = parse_all(wire, chunk);
    ASSERT_EQ(parsed.size(), requests.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      ASSERT_EQ(std::get<Request>(parsed[i]), requests[i]);
    }
  }
}

TEST(Protocol, MalformedHeaderIsRecoverable) {
  const auto parsed = parse_all("hello\r\n*1\r\n$4\r\nPING\r\n");
  ASSERT_EQ(parsed.size(), 2u);
  const auto& err = std::get<FrameError>(parsed[0]);
  EXPECT_FALSE(err.fatal);
  EXPECT_EQ(std::get<Request>(parsed[1]), (Request{"PING"}));
}

TEST(Protocol, BadLengths) {
  for (const char* bad : {"*0\r\n", "*x\r\n", "*1\r\n$-1\r\n", "*1\r\nPING\r\n"}) {
    const auto parsed = parse_all(bad);
    ASSERT_FALSE(parsed.empty()) << bad;
    EXPECT_TRUE(std::holds_alternative<FrameError>(parsed[0])) << bad;
  }
  const auto parsed = parse_all("*1\r\n$3\r\nabcd\r\n");
  ASSERT_FALSE(parsed.empty());
  EXPECT_TRUE(std::holds_alternative<FrameError>(parsed[0]));
}

TEST(Protocol, OversizedHeaderIsFatal) {
  const auto parsed = parse_all(std::string(200, '*'));
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_TRUE(std::get<FrameError>(parsed[0]).fatal);
}

TEST(Protocol, ReplyParserRoundTrip) {
  const std::vector<Reply> replies{Reply::ok(), Reply::of_integer(42), Reply::of_error("full"),
                                   Reply::of_array({"x", std::string("\0\r\n", 3)}),
                                   Reply::of_array({})};
  std::string wire;
  for (const auto& r : replies) append_reply(wire, r);
  ReplyParser parser;
  std::vector<Reply> back;
  for (char c : wire) {
    parser.feed(std::string_view(&c, 1));
    while (auto r = parser.next()) back.push_back(*r);
  }
  EXPECT_EQ(back, replies);
}

TEST(Protocol, ReplyParserRejectsGarbage) {
  ReplyParser parser;
  parser.feed("?what\r\n");
  EXPECT_THROW(parser.next(), ProtocolError);
}
