#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "grnet/errors.hpp"

namespace grnet {

enum class Role { kQuery, kGallery };
enum class SplitTag { kTrain, kVal, kTest };
enum class View { kFront, kSide, kBack };

// Attribute labels are trusted inputs; the thresholds that define them
// (yaw angle bands, >30% occluded / cropped) live with whoever produced the
// manifest, never computed from pixels here.
struct QueryAttributes {
  View view = View::kFront;
  bool occluded = false;
  bool cropped = false;
};

// Query filters used by the evaluation protocols. The gallery is never
// filtered. kAll is the unfiltered convenience protocol for overall metrics.
enum class Protocol { kEasy, kHardView, kHardOcclusion, kHardCropping, kAll };

inline bool protocol_selects(Protocol p, const QueryAttributes& a) {
  switch (p) {
    case Protocol::kEasy:
      return a.view == View::kFront && !a.occluded && !a.cropped;
    case Protocol::kHardView:
      return a.view != View::kFront;
    case Protocol::kHardOcclusion:
      return a.occluded;
    case Protocol::kHardCropping:
      return a.cropped;
    case Protocol::kAll:
      return true;
  }
  return false;
}

const char* role_name(Role r);
const char* split_name(SplitTag s);
const char* view_name(View v);
const char* protocol_name(Protocol p);
Role parse_role(const std::string& s);
SplitTag parse_split(const std::string& s);
View parse_view(const std::string& s);
Protocol parse_protocol(const std::string& s);

struct ManifestRecord {
  std::string item_id;
  Role role = Role::kQuery;
  std::string identity;
  std::string path;  // feature file path, relative to the data root
  QueryAttributes attributes;
  SplitTag split = SplitTag::kTrain;
  std::string category;  // optional
};

// Line-delimited manifest: one record per line as space-separated key=value
// fields, '#' lines are comments. Chosen over a binary catalog so datasets
// diff cleanly.
class Manifest {
 public:
  static Manifest load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file,
            const std::vector<std::string>& header_comments = {}) const;

  void add(ManifestRecord rec);

  const std::vector<ManifestRecord>& records() const { return records_; }
  const ManifestRecord& by_id(const std::string& item_id) const;
  bool has_id(const std::string& item_id) const { return by_id_.count(item_id) > 0; }

  std::vector<const ManifestRecord*> select(SplitTag split, Role role) const;
  // Identities with at least one query and one gallery record in the split,
  // sorted lexicographically.
  std::vector<std::string> identities_with_pair(SplitTag split) const;
  std::vector<const ManifestRecord*> identity_records(SplitTag split, Role role,
                                                      const std::string& identity) const;

  // Structural validation. Throws DataError with a distinct code per defect:
  //  manifest-empty, manifest-duplicate-item (guarded at add), and when
  //  check_files is set, manifest-dangling-path; the training split must give
  //  every identity both roles (manifest-identity-missing-role).
  void validate(const std::filesystem::path& data_root, bool check_files) const;

 private:
  std::vector<ManifestRecord> records_;
  std::map<std::string, std::size_t> by_id_;
};

std::string record_to_line(const ManifestRecord& rec);
ManifestRecord record_from_line(const std::string& line, int line_no);

// Data root resolution: explicit argument wins, otherwise the GRNET_DATA_ROOT
// environment variable, otherwise the manifest's own directory.
std::filesystem::path resolve_data_root(const std::filesystem::path& manifest_path,
                                        const std::optional<std::filesystem::path>& explicit_root);

}  // namespace grnet
