#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "skgait/fusion.hpp"

namespace skgait {

inline constexpr std::array<std::string_view, 9> kConditions{"LCL", "BOB", "SOB", "LOB", "MCL",
                                                             "HCL", "MG-S", "MG-D", "MG-T"};
inline constexpr std::array<std::string_view, 8> kViews{"0", "T45", "90", "T135", "180", "T225", "270", "T315"};

bool is_condition(std::string_view c);
bool is_view(std::string_view v);
// Nominal heading of a view label in degrees; turning views are the centre
// of their turn.
double view_degrees(std::string_view v);
bool is_turning_view(std::string_view v);

struct SubjectRecord {
  std::string id;
  std::string sex;  // "F" or "M"
  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

struct SequenceRecord {
  std::string id;
  std::string subject;
  std::string condition;
  std::string view;
  int frames = 0;
  std::string path;  // relative to the manifest directory
  friend bool operator==(const SequenceRecord&, const SequenceRecord&) = default;
};

struct DatasetManifest {
  std::vector<SubjectRecord> subjects;
  std::vector<SequenceRecord> sequences;
  std::string calibration;  // relative path, may be empty
  std::map<std::string, std::string> provenance;
  std::string base_dir;  // set by load_manifest, not serialized

  const SubjectRecord* subject(std::string_view id) const;
  std::string resolve(const std::string& relative) const;
  // Unique ids, known subjects, valid labels.
  void validate() const;
};

std::string serialize_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& text, const std::string& base_dir = ".");
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

// All frames of one recorded sequence: per time step, one frame per device
// (raw) or a single fused frame (OJ).
struct SkeletonSequence {
  std::map<std::string, std::string> provenance;
  std::vector<SkeletonFrame32> frames;  // ordered by (frame_index, source)

  // Frames grouped by frame_index, in ascending order.
  std::vector<std::vector<SkeletonFrame32>> by_time() const;
};

// JSON lines: a header {"format":"skgait-sequence","version":1,"provenance":{}}
// followed by one record per frame:
// {"t":i,"device":"master|sub1|sub2|OJ","joints":[[x,y,z]|null ×32],"conf":[c ×32]}
std::string serialize_sequence(const SkeletonSequence& s);
SkeletonSequence parse_sequence(std::string_view text);
SkeletonSequence load_sequence(const std::string& path);
void save_sequence(const SkeletonSequence& s, const std::string& path);

}  // namespace skgait
