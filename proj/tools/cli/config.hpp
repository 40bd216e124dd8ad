#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>

#include "hypstruct/error.hpp"
#include "hypstruct/hierarchy.hpp"
#include "hypstruct/objective.hpp"
#include "hypstruct/training.hpp"
#include "json.hpp"

namespace hypstruct::cli {

using Json = nlohmann::ordered_json;

/// Reads `key` from the object `node`. When absent the fallback is written
/// back, so the node ends up holding the fully resolved configuration.
template <class T>
T take(Json& node, const char* key, T fallback) {
  if (!node.is_object()) throw Error(ErrorCode::ValidationError, std::string("expected an object around '") + key + "'");
  auto it = node.find(key);
  if (it == node.end() || it->is_null()) {
    node[key] = fallback;
    return fallback;
  }
  try {
    return it->template get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("config key '") + key + "': " + e.what());
  }
}

template <class E>
E take_enum(Json& node, const char* key, E fallback, std::initializer_list<std::pair<const char*, E>> names) {
  std::string fallback_name;
  for (const auto& [n, v] : names) {
    if (v == fallback) fallback_name = n;
  }
  const auto s = take<std::string>(node, key, fallback_name);
  std::string known;
  for (const auto& [n, v] : names) {
    if (s == n) return v;
    known += known.empty() ? n : std::string(", ") + n;
  }
  throw Error(ErrorCode::ValidationError, std::string("config key '") + key + "' must be one of " + known);
}

/// Child object `key`, created empty when absent.
Json& section(Json& node, const char* key);
Json& required(Json& node, const char* key);

std::string read_file(const std::filesystem::path& path);
/// Parses a JSON config file; an empty path gives an empty object.
Json load_config(const std::string& path);

/// "cifar10" or the path of a JSON hierarchy file; key "tree".
hierarchy::LabelTree load_tree(Json& cfg);

objective::ObjectiveConfig read_objective(Json& node, objective::ObjectiveConfig defaults);
/// `noise_seed` defaults to the center seed unless given here or in `node`.
training::SyntheticSpec read_synthetic(Json& node, const hierarchy::LabelTree& tree, std::uint64_t seed,
                                       std::optional<std::uint64_t> noise_seed = std::nullopt);

struct DatasetSource {
  hierarchy::LabeledDataset data;
  std::optional<training::SyntheticSpec> synthetic;
};

/// `{"csv": path}` or `{"synthetic": {...}}`; synthetic is the default.
DatasetSource load_dataset(Json& node, const hierarchy::LabelTree& tree, std::uint64_t seed,
                           std::optional<std::uint64_t> noise_seed = std::nullopt);

training::Model load_checkpoint(const std::filesystem::path& path);

/// Numeric CSV, one row per line. A first line that is not numeric is
/// treated as a header and skipped.
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace hypstruct::cli
