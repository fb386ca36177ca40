#include "skgait/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "skgait/error.hpp"
#include "skgait/json_io.hpp"
#include "skgait/textio.hpp"

namespace skgait {

bool is_condition(std::string_view c) { return std::find(kConditions.begin(), kConditions.end(), c) != kConditions.end(); }
bool is_view(std::string_view v) { return std::find(kViews.begin(), kViews.end(), v) != kViews.end(); }
bool is_turning_view(std::string_view v) { return is_view(v) && v.front() == 'T'; }

double view_degrees(std::string_view v) {
  if (!is_view(v)) throw FormatError("unknown view '" + std::string(v) + "'");
  if (v.front() == 'T') v.remove_prefix(1);
  return std::stod(std::string(v));
}

const SubjectRecord* DatasetManifest::subject(std::string_view id) const {
  for (const auto& s : subjects)
    if (s.id == id) return &s;
  return nullptr;
}

std::string DatasetManifest::resolve(const std::string& relative) const {
  const std::filesystem::path p(relative);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (std::filesystem::path(base_dir) / p).string();
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& s : subjects) {
    if (s.id.empty()) throw FormatError("manifest subject with empty id");
    if (s.sex != "F" && s.sex != "M") throw FormatError("subject " + s.id + " has sex '" + s.sex + "', want F or M");
    if (!ids.insert(s.id).second) throw FormatError("duplicate subject id " + s.id);
  }
  std::set<std::string> seqs;
  for (const auto& q : sequences) {
    if (!seqs.insert(q.id).second) throw FormatError("duplicate sequence id " + q.id);
    if (!subject(q.subject)) throw FormatError("sequence " + q.id + " references unknown subject " + q.subject);
    if (!is_condition(q.condition)) throw FormatError("sequence " + q.id + " has unknown condition " + q.condition);
    if (!is_view(q.view)) throw FormatError("sequence " + q.id + " has unknown view " + q.view);
    if (q.frames < 1) throw FormatError("sequence " + q.id + " has no frames");
  }
}

std::string serialize_manifest(const DatasetManifest& m) {
  Json subjects = Json::array();
  for (const auto& s : m.subjects) subjects.push_back({{"id", s.id}, {"sex", s.sex}});
  Json sequences = Json::array();
  for (const auto& q : m.sequences)
    sequences.push_back({{"id", q.id},
                         {"subject", q.subject},
                         {"condition", q.condition},
                         {"view", q.view},
                         {"frames", q.frames},
                         {"path", q.path}});
  const Json j = {{"format", "skgait-manifest"}, {"version", 1},           {"provenance", m.provenance},
                  {"calibration", m.calibration}, {"subjects", subjects}, {"sequences", sequences}};
  return j.dump(1) + "\n";
}

DatasetManifest parse_manifest(const std::string& text, const std::string& base_dir) {
  try {
    const Json j = Json::parse(text);
    reject_unknown_keys(j, {"format", "version", "provenance", "calibration", "subjects", "sequences"}, "manifest");
    if (j.at("format") != "skgait-manifest") throw FormatError("not a skgait manifest");
    if (j.at("version") != 1) throw FormatError("unsupported manifest version " + j.at("version").dump());
    DatasetManifest m;
    m.base_dir = base_dir;
    if (j.contains("provenance")) m.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    if (j.contains("calibration")) m.calibration = j.at("calibration").get<std::string>();
    for (const auto& s : j.at("subjects")) {
      reject_unknown_keys(s, {"id", "sex"}, "manifest.subjects[]");
      m.subjects.push_back({s.at("id").get<std::string>(), s.at("sex").get<std::string>()});
    }
    for (const auto& q : j.at("sequences")) {
      reject_unknown_keys(q, {"id", "subject", "condition", "view", "frames", "path"}, "manifest.sequences[]");
      m.sequences.push_back({q.at("id").get<std::string>(), q.at("subject").get<std::string>(),
                             q.at("condition").get<std::string>(), q.at("view").get<std::string>(),
                             q.at("frames").get<int>(), q.at("path").get<std::string>()});
    }
    m.validate();
    return m;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

DatasetManifest load_manifest(const std::string& path) {
  return parse_manifest(read_text_file(path), std::filesystem::path(path).parent_path().string());
}

void save_manifest(const DatasetManifest& m, const std::string& path) { write_text_file(path, serialize_manifest(m)); }

std::vector<std::vector<SkeletonFrame32>> SkeletonSequence::by_time() const {
  std::map<int, std::vector<SkeletonFrame32>> groups;
  for (const auto& f : frames) groups[f.frame_index].push_back(f);
  std::vector<std::vector<SkeletonFrame32>> out;
  out.reserve(groups.size());
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

std::string serialize_sequence(const SkeletonSequence& s) {
  std::string out = Json{{"format", "skgait-sequence"}, {"version", 1}, {"provenance", s.provenance}}.dump();
  out.push_back('\n');
  for (const auto& f : s.frames) {
    Json joints = Json::array();
    Json conf = Json::array();
    for (const auto& slot : f.joints) {
      if (slot) {
        joints.push_back({slot->position.x, slot->position.y, slot->position.z});
        conf.push_back(slot->confidence);
      } else {
        joints.push_back(nullptr);
        conf.push_back(0.0);
      }
    }
    out += Json{{"t", f.frame_index}, {"device", std::string(to_string(f.source))}, {"joints", joints}, {"conf", conf}}
               .dump();
    out.push_back('\n');
  }
  return out;
}

SkeletonSequence parse_sequence(std::string_view text) {
  SkeletonSequence s;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = false;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "sequence line " + std::to_string(line_no);
    try {
      const Json j = Json::parse(line);
      if (!header) {
        reject_unknown_keys(j, {"format", "version", "provenance"}, where);
        if (j.at("format") != "skgait-sequence") throw FormatError(where + ": not a skgait sequence");
        if (j.at("version") != 1) throw FormatError(where + ": unsupported version " + j.at("version").dump());
        if (j.contains("provenance")) s.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
        header = true;
        continue;
      }
      reject_unknown_keys(j, {"t", "device", "joints", "conf"}, where);
      SkeletonFrame32 f;
      f.frame_index = j.at("t").get<int>();
      f.source = parse_source(j.at("device").get<std::string>());
      const Json& joints = j.at("joints");
      const Json& conf = j.at("conf");
      if (joints.size() != kSourceJoints || conf.size() != kSourceJoints)
        throw FormatError(where + ": expected " + std::to_string(kSourceJoints) + " joints and confidences");
      for (int k = 0; k < kSourceJoints; ++k) {
        const Json& p = joints[static_cast<std::size_t>(k)];
        if (p.is_null()) continue;
        if (!p.is_array() || p.size() != 3) throw FormatError(where + ": joint " + std::to_string(k) + " is not [x,y,z]");
        f.set(k, {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()},
              conf[static_cast<std::size_t>(k)].get<double>());
      }
      s.frames.push_back(f);
    } catch (const Json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  if (!header) throw FormatError("sequence file is empty");
  return s;
}

SkeletonSequence load_sequence(const std::string& path) {
  try {
    return parse_sequence(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void save_sequence(const SkeletonSequence& s, const std::string& path) { write_text_file(path, serialize_sequence(s)); }

}  // namespace skgait
