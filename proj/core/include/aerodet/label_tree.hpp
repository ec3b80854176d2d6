#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace aerodet {

struct ClassInfo {
  int id = 0;
  std::string name;

  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

/// Two-level category hierarchy: C base classes, C_s stacked parent classes, and
/// the child -> parent map. Channel layout is base classes 0..C-1 in declaration
/// order followed by stacked classes C..C+C_s-1.
///
/// Region classes are dataset ids that are recognized on load but never trained
/// or evaluated as a category (e.g. visDrone "ignored regions"). Annotations whose
/// category is in `ignore_ids` (or is a region class) carry the ignore flag.
class LabelTree {
 public:
  LabelTree() = default;
  LabelTree(std::vector<ClassInfo> base, std::vector<ClassInfo> stacked,
            std::map<int, int> parent_of, std::vector<ClassInfo> regions = {},
            std::set<int> ignore_ids = {});

  std::size_t num_base() const noexcept { return base_.size(); }
  std::size_t num_stacked() const noexcept { return stacked_.size(); }
  std::size_t num_channels() const noexcept { return base_.size() + stacked_.size(); }

  const std::vector<ClassInfo>& base_classes() const noexcept { return base_; }
  const std::vector<ClassInfo>& stacked_classes() const noexcept { return stacked_; }
  const std::vector<ClassInfo>& region_classes() const noexcept { return regions_; }
  const std::map<int, int>& parent_map() const noexcept { return parent_of_; }
  const std::set<int>& ignore_ids() const noexcept { return ignore_ids_; }

  bool is_base(int id) const noexcept;
  bool is_stacked(int id) const noexcept;
  bool is_region(int id) const noexcept;
  bool known(int id) const noexcept { return is_base(id) || is_stacked(id) || is_region(id); }
  /// Annotations of this category are excluded from training targets.
  bool ignored(int id) const noexcept { return is_region(id) || ignore_ids_.contains(id); }

  std::optional<int> parent_of(int base_id) const;
  std::optional<int> channel_of(int id) const;
  /// Category id written at `channel`; throws std::out_of_range.
  int class_at_channel(int channel) const;
  bool is_stacked_channel(int channel) const noexcept {
    return channel >= static_cast<int>(base_.size());
  }

  std::optional<int> id_of(std::string_view name) const;
  const std::string& name_of(int id) const;

  void set_ignored(int id, bool ignored);

  friend bool operator==(const LabelTree&, const LabelTree&) = default;

 private:
  void validate() const;

  std::vector<ClassInfo> base_;
  std::vector<ClassInfo> stacked_;
  std::map<int, int> parent_of_;
  std::vector<ClassInfo> regions_;
  std::set<int> ignore_ids_;
};

/// visDrone-DET: 11 base classes (dataset ids 1..11), 3 stacked parents
/// (human, vehicles, non-motor-vehicles) and the "ignored regions" region class (0).
/// `others` (11) is flagged ignore unless `ignore_others` is false.
LabelTree visdrone_label_tree(bool ignore_others = true);

/// UAVDT: car(1), truck(2), bus(3); no stacked classes.
LabelTree uavdt_label_tree();

LabelTree load_label_tree(const std::filesystem::path& path);
void save_label_tree(const LabelTree& tree, const std::filesystem::path& path);

}  // namespace aerodet
