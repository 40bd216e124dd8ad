#include "hypstruct/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "hypstruct/error.hpp"

namespace hypstruct::hierarchy {

using json = nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ValidationError, what); }

}  // namespace

LabelTree LabelTree::from_nodes(std::vector<NodeSpec> nodes) {
  const auto n = static_cast<VertexId>(nodes.size());
  if (n == 0) invalid("tree has no vertices");

  LabelTree t;
  t.children_.assign(nodes.size(), {});
  std::unordered_set<std::string> names;
  for (VertexId v = 0; v < n; ++v) {
    auto& node = nodes[idx(v)];
    if (!names.insert(node.name).second) invalid("duplicate vertex name '" + node.name + "'");
    if (node.parent == kNoVertex) {
      if (t.root_ != kNoVertex) invalid("more than one root ('" + node.name + "')");
      t.root_ = v;
      node.weight = 0.0;
      continue;
    }
    if (node.parent < 0 || node.parent >= n) invalid("orphan vertex '" + node.name + "'");
    if (node.parent == v) invalid("cycle at vertex '" + node.name + "'");
    if (!(node.weight > 0.0) || !std::isfinite(node.weight)) {
      invalid("non-positive weight on edge to '" + node.name + "'");
    }
    t.children_[idx(node.parent)].push_back(v);
  }
  if (t.root_ == kNoVertex) invalid("tree has no root");
  t.nodes_ = std::move(nodes);

  // Depth-first from the root; anything unreached sits on a cycle.
  t.depth_.assign(t.nodes_.size(), -1);
  t.wdepth_.assign(t.nodes_.size(), 0.0);
  std::vector<VertexId> order;
  order.reserve(t.nodes_.size());
  std::vector<VertexId> stack{t.root_};
  t.depth_[idx(t.root_)] = 0;
  while (!stack.empty()) {
    const VertexId v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (VertexId c : t.children_[idx(v)]) {
      t.depth_[idx(c)] = t.depth_[idx(v)] + 1;
      t.wdepth_[idx(c)] = t.wdepth_[idx(v)] + t.nodes_[idx(c)].weight;
      stack.push_back(c);
    }
  }
  if (order.size() != t.nodes_.size()) {
    for (VertexId v = 0; v < n; ++v) {
      if (t.depth_[idx(v)] < 0) invalid("cycle through vertex '" + t.nodes_[idx(v)].name + "'");
    }
  }

  t.height_.assign(t.nodes_.size(), 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const VertexId v = *it;
    if (v != t.root_) {
      auto& ph = t.height_[idx(t.nodes_[idx(v)].parent)];
      ph = std::max(ph, t.height_[idx(v)] + 1);
    }
  }

  t.class_of_.assign(t.nodes_.size(), -1);
  for (VertexId v = 0; v < n; ++v) {
    if (t.children_[idx(v)].empty()) {
      t.class_of_[idx(v)] = static_cast<int>(t.leaves_.size());
      t.leaves_.push_back(v);
    }
  }
  return t;
}

std::optional<VertexId> LabelTree::find(std::string_view name) const {
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (nodes_[v].name == name) return static_cast<VertexId>(v);
  }
  return std::nullopt;
}

VertexId LabelTree::lca(VertexId a, VertexId b) const {
  while (depth(a) > depth(b)) a = parent(a);
  while (depth(b) > depth(a)) b = parent(b);
  while (a != b) {
    a = parent(a);
    b = parent(b);
  }
  return a;
}

double LabelTree::distance(VertexId a, VertexId b) const {
  return weighted_depth(a) + weighted_depth(b) - 2.0 * weighted_depth(lca(a, b));
}

std::vector<int> LabelTree::classes_under(VertexId v) const {
  std::vector<int> out;
  std::vector<VertexId> stack{v};
  while (!stack.empty()) {
    const VertexId u = stack.back();
    stack.pop_back();
    if (is_leaf(u)) out.push_back(class_of(u));
    for (VertexId c : children(u)) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

TreeMetric tree_metric(const LabelTree& tree) {
  const std::size_t n = tree.vertex_count();
  TreeMetric m{Matrix(n, n)};
  std::vector<std::vector<VertexId>> adjacency(n);
  for (std::size_t v = 0; v < n; ++v) {
    const VertexId p = tree.parent(static_cast<VertexId>(v));
    if (p != kNoVertex) {
      adjacency[v].push_back(p);
      adjacency[static_cast<std::size_t>(p)].push_back(static_cast<VertexId>(v));
    }
  }
  // One weighted traversal per source vertex.
  std::vector<std::pair<VertexId, VertexId>> stack;
  for (std::size_t s = 0; s < n; ++s) {
    auto row = m.dist.row(s);
    stack.assign(1, {static_cast<VertexId>(s), kNoVertex});
    while (!stack.empty()) {
      const auto [v, from] = stack.back();
      stack.pop_back();
      for (VertexId u : adjacency[static_cast<std::size_t>(v)]) {
        if (u == from) continue;
        const VertexId child = tree.parent(u) == v ? u : v;
        row[static_cast<std::size_t>(u)] = row[static_cast<std::size_t>(v)] + tree.edge_weight(child);
        stack.push_back({u, v});
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) m.dist(b, a) = m.dist(a, b);
  return m;
}

int lca_height(const LabelTree& tree, VertexId leaf_a, VertexId leaf_b) {
  for (VertexId v : {leaf_a, leaf_b}) {
    if (v < 0 || static_cast<std::size_t>(v) >= tree.vertex_count() || !tree.is_leaf(v)) {
      throw Error(ErrorCode::NotALeaf, "vertex " + std::to_string(v) + " is not a leaf");
    }
  }
  return tree.height(tree.lca(leaf_a, leaf_b));
}

LabelTree balanced_tree(std::span<const std::size_t> level_counts) {
  if (level_counts.empty() || level_counts.front() != 1) {
    throw Error(ErrorCode::InvalidLevelCounts, "the top level must hold exactly one root");
  }
  for (std::size_t i = 1; i < level_counts.size(); ++i) {
    if (level_counts[i] == 0 || level_counts[i] % level_counts[i - 1] != 0) {
      throw Error(ErrorCode::InvalidLevelCounts,
                  "level count " + std::to_string(level_counts[i]) +
                      " is not a positive multiple of " + std::to_string(level_counts[i - 1]));
    }
  }
  const std::size_t height = level_counts.size() - 1;
  std::vector<NodeSpec> nodes;
  nodes.push_back({"root", kNoVertex, 0.0});
  std::vector<VertexId> previous{0};
  for (std::size_t level = 1; level < level_counts.size(); ++level) {
    const std::size_t fanout = level_counts[level] / level_counts[level - 1];
    const std::size_t h = height - level;
    std::vector<VertexId> current;
    std::size_t index = 0;
    for (VertexId p : previous) {
      for (std::size_t k = 0; k < fanout; ++k, ++index) {
        const std::string name =
            h == 0 ? "leaf" + std::to_string(index) : "h" + std::to_string(h) + "_" + std::to_string(index);
        current.push_back(static_cast<VertexId>(nodes.size()));
        nodes.push_back({name, p, 1.0});
      }
    }
    previous = std::move(current);
  }
  return LabelTree::from_nodes(std::move(nodes));
}

namespace {

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

void collect(const json& node, VertexId parent, std::vector<NodeSpec>& out, int depth) {
  if (depth > 10000) invalid("hierarchy nested too deeply");
  if (!node.is_object()) invalid("every vertex must be a JSON object");
  const auto name_it = node.find("name");
  if (name_it == node.end() || !name_it->is_string()) invalid("vertex without a string 'name'");
  NodeSpec spec{name_it->get<std::string>(), parent, 1.0};
  if (const auto w = node.find("weight"); w != node.end()) {
    if (parent == kNoVertex) invalid("root '" + spec.name + "' must not carry an edge weight");
    if (!w->is_number()) invalid("weight of '" + spec.name + "' is not a number");
    spec.weight = w->get<double>();
    if (!(spec.weight > 0.0) || !std::isfinite(spec.weight)) {
      invalid("non-positive weight on edge to '" + spec.name + "'");
    }
  }
  const auto self = static_cast<VertexId>(out.size());
  out.push_back(std::move(spec));
  if (const auto ch = node.find("children"); ch != node.end()) {
    if (!ch->is_array()) invalid("'children' of '" + out.back().name + "' is not an array");
    for (const auto& c : *ch) collect(c, self, out, depth + 1);
  }
}

json to_json(const LabelTree& tree, VertexId v) {
  json node = {{"name", tree.name(v)}};
  if (v != tree.root()) node["weight"] = tree.edge_weight(v);
  if (!tree.is_leaf(v)) {
    json children = json::array();
    for (VertexId c : tree.children(v)) children.push_back(to_json(tree, c));
    node["children"] = std::move(children);
  }
  return node;
}

}  // namespace

LabelTree parse_tree(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(line, column, e.what());
  }
  std::vector<NodeSpec> nodes;
  collect(doc, kNoVertex, nodes, 0);
  return LabelTree::from_nodes(std::move(nodes));
}

std::string serialize_tree(const LabelTree& tree) { return to_json(tree, tree.root()).dump(2); }

LabelTree normalize_depths(const LabelTree& tree) {
  int max_depth = 0;
  for (VertexId leaf : tree.leaves()) max_depth = std::max(max_depth, tree.depth(leaf));

  // Rebuild in depth-first document order so leaf order is unchanged.
  std::vector<NodeSpec> nodes;
  std::vector<std::pair<VertexId, VertexId>> stack{{tree.root(), kNoVertex}};
  while (!stack.empty()) {
    auto [v, new_parent] = stack.back();
    stack.pop_back();
    double weight = tree.edge_weight(v);
    if (tree.is_leaf(v)) {
      for (int k = tree.depth(v); k < max_depth; ++k) {
        const auto dummy = static_cast<VertexId>(nodes.size());
        nodes.push_back({tree.name(v) + "~dummy" + std::to_string(k - tree.depth(v) + 1),
                         new_parent, new_parent == kNoVertex ? 0.0 : 1.0});
        new_parent = dummy;
      }
    }
    const auto self = static_cast<VertexId>(nodes.size());
    nodes.push_back({tree.name(v), new_parent, weight});
    const auto ch = tree.children(v);
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back({*it, self});
  }
  return LabelTree::from_nodes(std::move(nodes));
}

LabelTree builtin_cifar10_tree() {
  std::vector<NodeSpec> nodes{{"root", kNoVertex, 0.0}, {"transportation", 0, 1.0}};
  for (const char* name : {"airplane", "automobile", "ship", "truck"}) nodes.push_back({name, 1, 1.0});
  nodes.push_back({"animal", 0, 1.0});
  const auto animal = static_cast<VertexId>(nodes.size() - 1);
  for (const char* name : {"bird", "cat", "deer", "dog", "frog", "horse"}) {
    nodes.push_back({name, animal, 1.0});
  }
  return LabelTree::from_nodes(std::move(nodes));
}

LabeledDataset read_dataset_csv(std::istream& in, const LabelTree& tree) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };

  if (!next_line()) throw ParseError(1, 1, "empty dataset");
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "label") {
    throw ParseError(line_no, 1, "header must be label,f0,f1,...");
  }
  const std::size_t dim = header.size() - 1;
  std::vector<double> values;
  std::vector<int> labels;
  while (next_line()) {
    const auto cells = split(line);
    if (cells.size() != dim + 1) {
      throw ParseError(line_no, 1, "expected " + std::to_string(dim + 1) + " fields, got " +
                                       std::to_string(cells.size()));
    }
    const auto v = tree.find(cells[0]);
    if (!v || !tree.is_leaf(*v)) {
      throw Error(ErrorCode::ValidationError,
                  "line " + std::to_string(line_no) + ": label '" + cells[0] + "' is not a leaf");
    }
    labels.push_back(tree.class_of(*v));
    std::size_t column = cells[0].size() + 2;
    for (std::size_t j = 1; j <= dim; ++j) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(cells[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[j].size() || !std::isfinite(x)) {
        throw ParseError(line_no, column, "invalid number '" + cells[j] + "'");
      }
      values.push_back(x);
      column += cells[j].size() + 1;
    }
  }
  LabeledDataset data;
  data.features = Matrix(labels.size(), dim, std::move(values));
  data.labels = std::move(labels);
  return data;
}

LabeledDataset read_dataset_csv_file(const std::string& path, const LabelTree& tree) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open dataset '" + path + "'");
  return read_dataset_csv(in, tree);
}

void write_dataset_csv(std::ostream& out, const LabeledDataset& data, const LabelTree& tree) {
  out << "label";
  for (std::size_t j = 0; j < data.dim(); ++j) out << ",f" << j;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << tree.name(tree.leaf_vertex(data.labels[i]));
    for (double x : data.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace hypstruct::hierarchy
