#include "grnet/manifest.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace grnet {

const char* role_name(Role r) { return r == Role::kQuery ? "query" : "gallery"; }

const char* split_name(SplitTag s) {
  switch (s) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kVal: return "val";
    case SplitTag::kTest: return "test";
  }
  return "?";
}

const char* view_name(View v) {
  switch (v) {
    case View::kFront: return "front";
    case View::kSide: return "side";
    case View::kBack: return "back";
  }
  return "?";
}

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kEasy: return "E";
    case Protocol::kHardView: return "HV";
    case Protocol::kHardOcclusion: return "HO";
    case Protocol::kHardCropping: return "HC";
    case Protocol::kAll: return "ALL";
  }
  return "?";
}

Role parse_role(const std::string& s) {
  if (s == "query") return Role::kQuery;
  if (s == "gallery") return Role::kGallery;
  throw DataError("manifest-parse", "unknown role '" + s + "'");
}

SplitTag parse_split(const std::string& s) {
  if (s == "train") return SplitTag::kTrain;
  if (s == "val") return SplitTag::kVal;
  if (s == "test") return SplitTag::kTest;
  throw DataError("manifest-parse", "unknown split '" + s + "'");
}

View parse_view(const std::string& s) {
  if (s == "front") return View::kFront;
  if (s == "side") return View::kSide;
  if (s == "back") return View::kBack;
  throw DataError("manifest-parse", "unknown view '" + s + "'");
}

Protocol parse_protocol(const std::string& s) {
  if (s == "E") return Protocol::kEasy;
  if (s == "HV") return Protocol::kHardView;
  if (s == "HO") return Protocol::kHardOcclusion;
  if (s == "HC") return Protocol::kHardCropping;
  if (s == "ALL") return Protocol::kAll;
  throw InputError("unknown protocol '" + s + "' (expected E, HV, HO, HC or ALL)");
}

std::string record_to_line(const ManifestRecord& r) {
  std::ostringstream os;
  os << "item=" << r.item_id << " role=" << role_name(r.role) << " identity=" << r.identity
     << " path=" << r.path << " view=" << view_name(r.attributes.view)
     << " occluded=" << (r.attributes.occluded ? 1 : 0)
     << " cropped=" << (r.attributes.cropped ? 1 : 0) << " split=" << split_name(r.split);
  if (!r.category.empty()) os << " category=" << r.category;
  return os.str();
}

ManifestRecord record_from_line(const std::string& line, int line_no) {
  ManifestRecord rec;
  std::istringstream is(line);
  std::string token;
  std::set<std::string> seen;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos)
      throw DataError("manifest-parse",
                      "line " + std::to_string(line_no) + ": token '" + token + "' is not key=value");
    const std::string key = token.substr(0, eq);
    const std::string val = token.substr(eq + 1);
    if (!seen.insert(key).second)
      throw DataError("manifest-parse",
                      "line " + std::to_string(line_no) + ": duplicate field '" + key + "'");
    if (key == "item") rec.item_id = val;
    else if (key == "role") rec.role = parse_role(val);
    else if (key == "identity") rec.identity = val;
    else if (key == "path") rec.path = val;
    else if (key == "view") rec.attributes.view = parse_view(val);
    else if (key == "occluded") rec.attributes.occluded = val == "1";
    else if (key == "cropped") rec.attributes.cropped = val == "1";
    else if (key == "split") rec.split = parse_split(val);
    else if (key == "category") rec.category = val;
    else
      throw DataError("manifest-parse",
                      "line " + std::to_string(line_no) + ": unknown field '" + key + "'");
  }
  for (const char* required : {"item", "role", "identity", "path", "split"})
    if (!seen.count(required))
      throw DataError("manifest-parse",
                      "line " + std::to_string(line_no) + ": missing field '" + required + "'");
  return rec;
}

Manifest Manifest::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("manifest-open", "cannot open manifest " + file.string());
  Manifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    m.add(record_from_line(line, line_no));
  }
  return m;
}

void Manifest::save(const std::filesystem::path& file,
                    const std::vector<std::string>& header_comments) const {
  std::ofstream out(file);
  if (!out) throw DataError("manifest-write", "cannot write manifest " + file.string());
  for (const auto& c : header_comments) out << "# " << c << "\n";
  for (const auto& r : records_) out << record_to_line(r) << "\n";
}

void Manifest::add(ManifestRecord rec) {
  if (rec.item_id.empty()) throw DataError("manifest-parse", "record without item id");
  if (by_id_.count(rec.item_id))
    throw DataError("manifest-duplicate-item", "duplicate item id '" + rec.item_id + "'");
  by_id_[rec.item_id] = records_.size();
  records_.push_back(std::move(rec));
}

const ManifestRecord& Manifest::by_id(const std::string& item_id) const {
  auto it = by_id_.find(item_id);
  if (it == by_id_.end()) throw DataError("manifest-unknown-item", "no item '" + item_id + "'");
  return records_[it->second];
}

std::vector<const ManifestRecord*> Manifest::select(SplitTag split, Role role) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records_)
    if (r.split == split && r.role == role) out.push_back(&r);
  return out;
}

std::vector<std::string> Manifest::identities_with_pair(SplitTag split) const {
  std::map<std::string, std::pair<bool, bool>> roles;  // identity -> (has query, has gallery)
  for (const auto& r : records_) {
    if (r.split != split) continue;
    auto& flags = roles[r.identity];
    if (r.role == Role::kQuery) flags.first = true;
    else flags.second = true;
  }
  std::vector<std::string> out;
  for (const auto& [id, flags] : roles)
    if (flags.first && flags.second) out.push_back(id);
  return out;  // std::map iteration is already sorted
}

std::vector<const ManifestRecord*> Manifest::identity_records(SplitTag split, Role role,
                                                              const std::string& identity) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records_)
    if (r.split == split && r.role == role && r.identity == identity) out.push_back(&r);
  return out;
}

void Manifest::validate(const std::filesystem::path& data_root, bool check_files) const {
  if (records_.empty()) throw DataError("manifest-empty", "manifest has no records");
  if (check_files) {
    for (const auto& r : records_) {
      const auto p = data_root / r.path;
      if (!std::filesystem::exists(p))
        throw DataError("manifest-dangling-path",
                        "item '" + r.item_id + "' points to missing file " + p.string());
    }
  }
  std::map<std::string, std::pair<bool, bool>> train_roles;
  for (const auto& r : records_) {
    if (r.split != SplitTag::kTrain) continue;
    auto& flags = train_roles[r.identity];
    if (r.role == Role::kQuery) flags.first = true;
    else flags.second = true;
  }
  for (const auto& [id, flags] : train_roles) {
    if (!flags.first)
      throw DataError("manifest-identity-missing-role",
                      "train identity '" + id + "' has no query record");
    if (!flags.second)
      throw DataError("manifest-identity-missing-role",
                      "train identity '" + id + "' has no gallery record");
  }
}

std::filesystem::path resolve_data_root(
    const std::filesystem::path& manifest_path,
    const std::optional<std::filesystem::path>& explicit_root) {
  if (explicit_root) return *explicit_root;
  if (const char* env = std::getenv("GRNET_DATA_ROOT"); env && *env)
    return std::filesystem::path(env);
  auto parent = manifest_path.parent_path();
  return parent.empty() ? std::filesystem::path(".") : parent;
}

}  // namespace grnet
