#pragma once

// Newline-delimited JSON transcripts. The first line is a header
//   {"type":"header","format":"dqkd-transcript/1","seed":...,"config":{...}}
// followed by one object per round whose keys are the RoundRecord field
// names; absent optionals are null.

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "dqkd/protocol.hpp"

namespace dqkd::proto {

nlohmann::ordered_json config_to_json(const SessionConfig& c);
SessionConfig config_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json round_to_json(const RoundRecord& r);
RoundRecord round_from_json(const nlohmann::ordered_json& j);

void write_transcript(std::ostream& os, const Transcript& t);
/// Throws std::runtime_error on malformed input. Raw keys are rebuilt from
/// the rounds.
Transcript read_transcript(std::istream& is);

}  // namespace dqkd::proto
