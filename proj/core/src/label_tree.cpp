#include "aerodet/label_tree.hpp"

#include <algorithm>
#include <stdexcept>

#include "aerodet/error.hpp"
#include "json_util.hpp"

namespace aerodet {

namespace {

const ClassInfo* find_class(const std::vector<ClassInfo>& classes, int id) {
  auto it = std::find_if(classes.begin(), classes.end(), [id](const auto& c) { return c.id == id; });
  return it == classes.end() ? nullptr : &*it;
}

}  // namespace

LabelTree::LabelTree(std::vector<ClassInfo> base, std::vector<ClassInfo> stacked,
                     std::map<int, int> parent_of, std::vector<ClassInfo> regions,
                     std::set<int> ignore_ids)
    : base_(std::move(base)),
      stacked_(std::move(stacked)),
      parent_of_(std::move(parent_of)),
      regions_(std::move(regions)),
      ignore_ids_(std::move(ignore_ids)) {
  validate();
}

void LabelTree::validate() const {
  if (base_.empty()) throw ConfigError("label tree needs at least one base class");
  std::set<int> seen;
  for (const auto* group : {&base_, &stacked_, &regions_})
    for (const auto& c : *group)
      if (!seen.insert(c.id).second)
        throw ConfigError("label tree: duplicate class id " + std::to_string(c.id));
  for (const auto& [child, parent] : parent_of_) {
    if (!is_base(child))
      throw ConfigError("label tree: parent map key " + std::to_string(child) +
                        " is not a base class");
    if (!is_stacked(parent))
      throw ConfigError("label tree: parent " + std::to_string(parent) +
                        " is not a stacked class");
  }
  for (int id : ignore_ids_)
    if (!known(id)) throw ConfigError("label tree: ignore id " + std::to_string(id) + " unknown");
}

bool LabelTree::is_base(int id) const noexcept { return find_class(base_, id) != nullptr; }
bool LabelTree::is_stacked(int id) const noexcept { return find_class(stacked_, id) != nullptr; }
bool LabelTree::is_region(int id) const noexcept { return find_class(regions_, id) != nullptr; }

std::optional<int> LabelTree::parent_of(int base_id) const {
  auto it = parent_of_.find(base_id);
  if (it == parent_of_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> LabelTree::channel_of(int id) const {
  for (std::size_t i = 0; i < base_.size(); ++i)
    if (base_[i].id == id) return static_cast<int>(i);
  for (std::size_t i = 0; i < stacked_.size(); ++i)
    if (stacked_[i].id == id) return static_cast<int>(base_.size() + i);
  return std::nullopt;
}

int LabelTree::class_at_channel(int channel) const {
  if (channel < 0 || channel >= static_cast<int>(num_channels()))
    throw std::out_of_range("channel " + std::to_string(channel) + " out of range");
  if (channel < static_cast<int>(base_.size())) return base_[channel].id;
  return stacked_[channel - base_.size()].id;
}

std::optional<int> LabelTree::id_of(std::string_view name) const {
  for (const auto* group : {&base_, &stacked_, &regions_})
    for (const auto& c : *group)
      if (c.name == name) return c.id;
  return std::nullopt;
}

const std::string& LabelTree::name_of(int id) const {
  for (const auto* group : {&base_, &stacked_, &regions_})
    if (const auto* c = find_class(*group, id)) return c->name;
  throw std::out_of_range("unknown class id " + std::to_string(id));
}

void LabelTree::set_ignored(int id, bool ignored) {
  if (!known(id)) throw ConfigError("unknown class id " + std::to_string(id));
  if (ignored) ignore_ids_.insert(id);
  else ignore_ids_.erase(id);
}

LabelTree visdrone_label_tree(bool ignore_others) {
  std::vector<ClassInfo> base = {
      {1, "pedestrian"}, {2, "people"}, {3, "bicycle"},         {4, "car"},
      {5, "van"},        {6, "truck"},  {7, "tricycle"},        {8, "awning-tricycle"},
      {9, "bus"},        {10, "motor"}, {11, "others"},
  };
  std::vector<ClassInfo> stacked = {{12, "human"}, {13, "vehicles"}, {14, "non-motor-vehicles"}};
  std::map<int, int> parents = {
      {1, 12}, {2, 12},                    // human
      {4, 13}, {5, 13}, {6, 13}, {9, 13},  // vehicles
      {3, 14}, {7, 14}, {8, 14}, {10, 14}  // non-motor-vehicles
  };
  std::set<int> ignore;
  if (ignore_others) ignore.insert(11);
  return LabelTree(std::move(base), std::move(stacked), std::move(parents),
                   {{0, "ignored-regions"}}, std::move(ignore));
}

LabelTree uavdt_label_tree() { return LabelTree({{1, "car"}, {2, "truck"}, {3, "bus"}}, {}, {}); }

namespace {

using detail::json;

std::vector<ClassInfo> classes_from_json(const json& arr, const std::string& where) {
  std::vector<ClassInfo> out;
  if (arr.is_null()) return out;
  if (!arr.is_array()) throw DataError(where + ": expected an array of classes");
  for (const auto& c : arr)
    out.push_back({detail::get_field<int>(c, "id", where), detail::get_field<std::string>(c, "name", where)});
  return out;
}

json classes_to_json(const std::vector<ClassInfo>& classes) {
  json arr = json::array();
  for (const auto& c : classes) arr.push_back({{"id", c.id}, {"name", c.name}});
  return arr;
}

}  // namespace

LabelTree load_label_tree(const std::filesystem::path& path) {
  const json doc = detail::read_json_file(path);
  const std::string where = path.string();
  for (const auto& [key, _] : doc.items())
    if (key != "base_classes" && key != "stacked_classes" && key != "parent_of" &&
        key != "region_classes" && key != "ignore_ids")
      throw DataError(where + ": unknown key '" + key + "'");
  std::map<int, int> parents;
  if (doc.contains("parent_of")) {
    for (const auto& [child, parent] : doc.at("parent_of").items()) {
      try {
        parents[std::stoi(child)] = parent.get<int>();
      } catch (const std::exception&) {
        throw DataError(where + ": bad parent_of entry '" + child + "'");
      }
    }
  }
  std::set<int> ignore;
  if (doc.contains("ignore_ids")) ignore = doc.at("ignore_ids").get<std::set<int>>();
  try {
    return LabelTree(classes_from_json(doc.value("base_classes", json()), where),
                     classes_from_json(doc.value("stacked_classes", json()), where),
                     std::move(parents),
                     classes_from_json(doc.value("region_classes", json()), where),
                     std::move(ignore));
  } catch (const ConfigError& e) {
    throw DataError(where + ": " + e.what());
  }
}

void save_label_tree(const LabelTree& tree, const std::filesystem::path& path) {
  json parents = json::object();
  for (const auto& [child, parent] : tree.parent_map()) parents[std::to_string(child)] = parent;
  json doc = {{"base_classes", classes_to_json(tree.base_classes())},
              {"stacked_classes", classes_to_json(tree.stacked_classes())},
              {"region_classes", classes_to_json(tree.region_classes())},
              {"parent_of", parents},
              {"ignore_ids", tree.ignore_ids()}};
  detail::write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace aerodet
