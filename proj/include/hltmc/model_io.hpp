#pragma once

#include <filesystem>
#include <string>

#include "hltmc/model.hpp"

namespace hltmc {

/// JSON document holding structure, leaf words and parameters. Doubles are
/// written in shortest round-trip form, so from_json(to_json(m)) == m.
std::string model_to_json(const HltmcModel& model);
/// Throws ParseError on malformed input and DataError on invalid models. CPT
/// rows that miss summing to 1 by more than 1e-15 are renormalized.
HltmcModel model_from_json(const std::string& text, const std::string& where = "<model>");

void save_model(const HltmcModel& model, const std::filesystem::path& path);
HltmcModel load_model(const std::filesystem::path& path);

}  // namespace hltmc
