#include "mrsession/trace.hpp"

#include <istream>
#include <ostream>

namespace mrsession {

using nlohmann::json;

json to_json(const TraceRecord& r) {
  json j;
  j["step"] = r.step;
  j["rule"] = r.rule;
  j["tids"] = r.tids;
  if (r.chan_id) j["chan_id"] = *r.chan_id;
  if (r.payload) j["payload"] = *r.payload;
  if (r.from) j["from"] = *r.from;
  if (r.to) j["to"] = *r.to;
  if (r.rho_ch) {
    json sets = json::array();
    for (const auto& set : r.rho_ch->sets) {
      json halves = json::array();
      for (const auto& h : set) halves.push_back(format_half(h));
      sets.push_back(std::move(halves));
    }
    j["rho_ch"] = std::move(sets);
  }
  return j;
}

TraceRecord record_from_json(const json& j) {
  try {
    TraceRecord r;
    r.step = j.at("step").get<std::uint64_t>();
    r.rule = j.at("rule").get<std::string>();
    r.tids = j.at("tids").get<std::vector<std::uint64_t>>();
    if (j.contains("chan_id")) r.chan_id = j["chan_id"].get<std::uint64_t>();
    if (j.contains("payload")) r.payload = j["payload"];
    if (j.contains("from")) r.from = j["from"].get<int>();
    if (j.contains("to")) r.to = j["to"].get<int>();
    if (j.contains("rho_ch")) {
      std::vector<ChannelSet> sets;
      for (const auto& halves : j["rho_ch"]) {
        ChannelSet set;
        for (const auto& h : halves) set.push_back(parse_half(h.get<std::string>()));
        sets.push_back(std::move(set));
      }
      r.rho_ch = ChannelSetCollection(std::move(sets));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::Io, std::string("malformed trace record: ") + e.what());
  }
}

std::string to_json_line(const TraceRecord& r) { return to_json(r).dump(); }

TraceRecord parse_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(Errc::Io, std::string("malformed trace line: ") + e.what());
  }
  return record_from_json(j);
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::vector<TraceRecord> read_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_json_line(line));
  }
  return out;
}

std::vector<ChannelSetCollection> trace_snapshots(const std::vector<TraceRecord>& records) {
  std::vector<ChannelSetCollection> out;
  for (const auto& r : records) {
    if (r.rho_ch) out.push_back(*r.rho_ch);
  }
  return out;
}

}  // namespace mrsession
