#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrsession/df_analysis.hpp"

namespace mrsession {

/// One line of the shared JSON-lines trace. The interpreter and the runtime
/// both emit this shape; `from`/`to` are only filled by runtime events.
struct TraceRecord {
  std::uint64_t step = 0;
  std::string rule;
  std::vector<std::uint64_t> tids;
  std::optional<std::uint64_t> chan_id;
  std::optional<nlohmann::json> payload;
  std::optional<int> from;
  std::optional<int> to;
  std::optional<ChannelSetCollection> rho_ch;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

nlohmann::json to_json(const TraceRecord& r);
TraceRecord record_from_json(const nlohmann::json& j);

std::string to_json_line(const TraceRecord& r);
TraceRecord parse_json_line(const std::string& line);

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records);
std::vector<TraceRecord> read_trace(std::istream& in);

/// Snapshots carried by the records, in order; records without one are skipped.
std::vector<ChannelSetCollection> trace_snapshots(const std::vector<TraceRecord>& records);

}  // namespace mrsession
