#include <doctest.h>

#include <random>
#include <sstream>

#include "mrsession/trace.hpp"

using namespace mrsession;

TEST_CASE("trace record json shape") {
  TraceRecord r;
  r.step = 3;
  r.rule = "PR4-send";
  r.tids = {0, 2};
  r.chan_id = 1;
  r.payload = "5";
  r.rho_ch = parse_collection("[{1+},{1-,2+},{2-}]");
  CHECK(to_json_line(r) ==
        R"({"chan_id":1,"payload":"5","rho_ch":[["1+"],["1-","2+"],["2-"]],"rule":"PR4-send","step":3,"tids":[0,2]})");
  CHECK(parse_json_line(to_json_line(r)) == r);
  CHECK_THROWS_AS(parse_json_line("{\"step\":1}"), Error);
  CHECK_THROWS_AS(parse_json_line("not json"), Error);
}

TEST_CASE("trace write/read round trip") {
  std::mt19937_64 rng(5);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::vector<TraceRecord> records;
  for (int k = 0; k < 1200; ++k) {
    TraceRecord r;
    r.step = static_cast<std::uint64_t>(k);
    r.rule = std::vector<std::string>{"init", "PR0", "PR3", "send", "recv"}[uni(0, 4)];
    for (int t = uni(0, 3); t > 0; --t) r.tids.push_back(static_cast<std::uint64_t>(uni(0, 9)));
    if (uni(0, 1)) r.chan_id = static_cast<std::uint64_t>(uni(1, 50));
    switch (uni(0, 3)) {
      case 0: r.payload = uni(-100, 100); break;
      case 1: r.payload = std::string("s\"") + std::to_string(uni(0, 9)); break;
      case 2: r.payload = nlohmann::json{{"tag", "int"}, {"value", uni(0, 5)}}; break;
      default: break;
    }
    if (uni(0, 1)) {
      r.from = uni(0, 3);
      r.to = uni(0, 3);
    }
    if (uni(0, 2)) {
      std::vector<ChannelSet> sets(static_cast<std::size_t>(uni(1, 4)));
      for (int c = uni(0, 4); c > 0; --c) {
        sets[static_cast<std::size_t>(uni(0, static_cast<int>(sets.size()) - 1))].push_back(
            {static_cast<std::uint64_t>(c), uni(0, 1) == 1});
      }
      r.rho_ch = ChannelSetCollection(std::move(sets));
    }
    records.push_back(r);
  }
  std::stringstream ss;
  write_trace(ss, records);
  std::string text = ss.str();
  auto back = read_trace(ss);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) CHECK(back[i] == records[i]);
  std::stringstream again;
  write_trace(again, back);
  CHECK(again.str() == text);
}
