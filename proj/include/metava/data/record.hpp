#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace metava::data {

// Half-open sample range [start, end) marked VA.
struct Interval {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Interval&) const = default;
};

struct Record {
  std::vector<double> samples;
  double rate = 200.0;
  std::vector<Interval> annotations;
  std::string subject;
  bool operator==(const Record&) const = default;
};

// Sorts and merges overlapping or touching intervals. Throws
// std::invalid_argument for empty, reversed or out-of-range intervals.
void normalize_annotations(Record& record);

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string path, std::size_t offset, const std::string& what);
  const std::string& path() const { return path_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string path_;
  std::size_t offset_;
};

enum class RecordFormat { detect, csv, binary };

// CSV: header "rate=<Hz>,subject=<id>", one sample per line, annotations in
// "<path>.ann" as "<start>,<end>,VA" lines. Binary: "MVA1" container.
// `detect` picks binary when the file starts with the magic bytes.
Record load_record(const std::filesystem::path& path, RecordFormat format = RecordFormat::detect);
void write_record(const Record& record, const std::filesystem::path& path,
                  RecordFormat format = RecordFormat::csv);

// Sample j of the output is the source interpolated at time j / target_rate.
// Interval bounds scale by the rate ratio and round to the nearest sample.
Record resample_linear(const Record& record, double target_rate = 200.0);

}  // namespace metava::data
