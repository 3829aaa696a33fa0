#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "evdet/record.hpp"

namespace evdet {

// Binary record file, magic "DSR1":
//   u32 channel count C, f64 sample rate, u64 sample count S,
//   C x (u32 length + UTF-8 bytes) channel names,
//   C x S little-endian f32, channel-major.
// The record id is the file stem.
void write_record(const Record& record, const std::filesystem::path& path);
Record read_record(const std::filesystem::path& path);

// Annotation file: one JSON object per line,
//   {"record_id": str, "start": s, "duration": s, "label": int >= 1}
// May hold events for several records; read_annotations groups by record_id
// and sorts each group by start time. Label 0 or negative is rejected.
void write_annotations(const std::vector<Annotation>& annotations,
                       const std::filesystem::path& path);
std::vector<Annotation> read_annotations(const std::filesystem::path& path);

// Split file: {"train": [...], "validation": [...], "test": [...]}
void write_split(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit read_split(const std::filesystem::path& path);

}  // namespace evdet
