#pragma once

// Dataset files are JSON Lines: an "utterance_header" record followed by that
// utterance's "frame" records, in order.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ae/core.hpp"

namespace ae::io {

inline constexpr const char* kDatasetFileName = "dataset.jsonl";

void write_dataset(std::ostream& out, const std::vector<Utterance>& utterances);
void write_dataset(const std::filesystem::path& path, const std::vector<Utterance>& utterances);

// Parse errors carry the 1-based line number.
std::vector<Utterance> read_dataset(std::istream& in);
std::vector<Utterance> read_dataset(const std::filesystem::path& path);

// Accepts either a dataset file or a directory containing dataset.jsonl.
std::filesystem::path resolve_dataset_path(const std::filesystem::path& path);

}  // namespace ae::io
