#pragma once

// Readers and writers for every on-disk format: source dataset lines,
// expanded GT files, prediction runs.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "gtexpand/model.hpp"
#include "gtexpand/prompt_kit.hpp"

namespace gtexpand {

struct DatasetLine {
  std::string sentence;
  std::vector<Quadruple> quads;
};

/// `SENTENCE####[[a, c, s, o], ...]`. Inner lists may be Python lists or
/// tuples, strings single- or double-quoted. Errors carry `line_no`.
DatasetLine parse_dataset_line(std::string_view line, const Taxonomy& taxonomy,
                               std::size_t line_no = 0);

/// Reads a dataset file; every example gets singleton groups. Blank lines are
/// skipped but still count toward the example index, so ids track file lines.
/// `name` defaults to the file stem.
Dataset read_dataset(const std::filesystem::path& path, std::shared_ptr<const Taxonomy> taxonomy,
                     std::string name = "");

/// Prediction shots in dataset-line form.
std::vector<Shot> read_shots(const std::filesystem::path& path, const Taxonomy& taxonomy);

// ---------------------------------------------------------------------------
// Expanded GT

std::string expanded_record(const Example& example, const Taxonomy& taxonomy);
void write_expanded(const ExpandedDataset& dataset, std::ostream& out);
void write_expanded(const ExpandedDataset& dataset, const std::filesystem::path& path);

/// Throws SchemaError naming the offending record id (or line when the id is
/// unreadable).
ExpandedDataset read_expanded(std::istream& in, const std::string& source = "<stream>");
ExpandedDataset read_expanded(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Prediction runs

struct RunRecord {
  std::string id;
  std::string raw_output;
};

void write_run_records(const std::vector<RunRecord>& records, const std::filesystem::path& path);
std::vector<RunRecord> read_run_records(const std::filesystem::path& path);

/// Writes a RunSet as raw records rendered in `order`.
void write_runset(const RunSet& run, const ElementOrder& order, const std::filesystem::path& path);

struct RunRead {
  RunSet run;
  /// One entry per record whose non-empty output yielded nothing usable.
  std::vector<std::string> diagnostics;
  /// Per-chunk notes from records that still produced predictions.
  std::vector<std::string> warnings;
};

/// Parses each record's raw output with the tagged parser. Model garbage is
/// recorded, never thrown; a missing id or a duplicate id throws.
RunRead read_runset(const std::filesystem::path& path, const ElementOrder& order,
                    const Taxonomy& taxonomy, std::string run_id = "");

}  // namespace gtexpand
