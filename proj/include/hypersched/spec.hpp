#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hypersched/domain.hpp"
#include "hypersched/errors.hpp"
#include "hypersched/json_util.hpp"

namespace hypersched {

enum class NodeTag { Group, Exclusive, Optional };

inline const char* to_string(NodeTag t) {
  switch (t) {
    case NodeTag::Group: return "group";
    case NodeTag::Exclusive: return "exclusive";
    case NodeTag::Optional: return "optional";
  }
  return "?";
}

// One node of the tagged search-space tree. Internal nodes carry a tag and
// children; leaves carry a Domain whose id is the slash-joined path from the
// root.
struct SpecNode {
  std::string name;
  NodeTag tag = NodeTag::Group;
  std::vector<SpecNode> children;
  std::optional<Domain> domain;

  bool is_leaf() const { return domain.has_value(); }
};

struct SpecTree {
  SpecNode root;
};

// A disjoint per-model search space produced by splitting: the ordered list
// of domains reachable under one concrete set of exclusive/optional choices.
struct ModelSpace {
  std::string model_id;
  std::vector<Domain> domains;

  const Domain* find_domain(const std::string& leaf_id) const {
    for (const auto& d : domains) {
      if (d.id == leaf_id) return &d;
    }
    return nullptr;
  }
};

// A sampled hyperparameter vector for one model.
struct Assignment {
  std::string model_id;
  std::map<std::string, Scalar> values;

  bool operator==(const Assignment&) const = default;
};

inline Json assignment_to_json(const Assignment& a) {
  Json j;
  j["model_id"] = a.model_id;
  j["values"] = a.values;
  return j;
}

inline Assignment assignment_from_json(const Json& j) {
  Assignment a;
  a.model_id = j.at("model_id").get<std::string>();
  for (const auto& [k, v] : j.at("values").items()) {
    a.values.emplace(k, scalar_from_json(v));
  }
  return a;
}

namespace detail {

inline Domain parse_domain(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "domain must be an object");
  if (!j.contains("kind") || !j.at("kind").is_string()) {
    throw ParseError(path, "domain is missing string field \"kind\"");
  }
  const std::string kind = j.at("kind").get<std::string>();
  const auto num = [&](const char* field) -> double {
    if (!j.contains(field) || !j.at(field).is_number()) {
      throw ParseError(path, std::string("domain field \"") + field +
                                 "\" must be a number");
    }
    return j.at(field).get<double>();
  };
  const auto integer = [&](const char* field) -> std::int64_t {
    if (!j.contains(field) || !j.at(field).is_number_integer()) {
      throw ParseError(path, std::string("domain field \"") + field +
                                 "\" must be an integer");
    }
    return j.at(field).get<std::int64_t>();
  };

  Domain d;
  if (kind == "uniform") {
    d = Domain::uniform(path, num("lo"), num("hi"));
  } else if (kind == "log_uniform") {
    d = Domain::log_uniform(path, num("lo"), num("hi"));
  } else if (kind == "normal") {
    d = Domain::normal(path, num("mu"), num("sigma"));
  } else if (kind == "randint") {
    d = Domain::randint(path, integer("lo"), integer("hi"));
  } else if (kind == "choice") {
    if (!j.contains("values") || !j.at("values").is_array()) {
      throw ParseError(path, "choice domain needs an array field \"values\"");
    }
    std::vector<Scalar> values;
    for (const auto& v : j.at("values")) {
      try {
        values.push_back(scalar_from_json(v));
      } catch (const Error& e) {
        throw ParseError(path, e.what());
      }
    }
    d = Domain::choice(path, std::move(values));
  } else {
    throw ParseError(path, "unknown domain kind \"" + kind + "\"");
  }
  d.validate();
  return d;
}

inline SpecNode parse_node(const Json& j, const std::string& parent_path) {
  if (!j.is_object()) {
    throw ParseError(parent_path, "node must be an object");
  }
  const bool is_leaf = j.contains("leaf");
  const bool is_internal = j.contains("node");
  if (is_leaf == is_internal) {
    throw ParseError(parent_path,
                     "node must have exactly one of \"leaf\" or \"node\"");
  }

  SpecNode node;
  const auto& name_field = is_leaf ? j.at("leaf") : j.at("node");
  if (!name_field.is_string() || name_field.get<std::string>().empty()) {
    throw ParseError(parent_path, "node name must be a non-empty string");
  }
  node.name = name_field.get<std::string>();
  if (node.name.find('/') != std::string::npos) {
    throw ParseError(parent_path,
                     "node name \"" + node.name + "\" may not contain '/'");
  }
  const std::string path =
      parent_path.empty() ? node.name : parent_path + "/" + node.name;

  if (is_leaf) {
    if (!j.contains("domain")) {
      throw ParseError(path, "leaf is missing field \"domain\"");
    }
    node.domain = parse_domain(j.at("domain"), path);
    return node;
  }

  const std::string tag =
      j.contains("tag") ? j.at("tag").get<std::string>() : "group";
  if (tag == "group") {
    node.tag = NodeTag::Group;
  } else if (tag == "exclusive") {
    node.tag = NodeTag::Exclusive;
  } else if (tag == "optional") {
    node.tag = NodeTag::Optional;
  } else {
    throw ParseError(path, "unknown node tag \"" + tag + "\"");
  }

  if (!j.contains("children") || !j.at("children").is_array() ||
      j.at("children").empty()) {
    throw ParseError(path, "internal node needs a non-empty children array");
  }
  std::set<std::string> seen;
  for (const auto& cj : j.at("children")) {
    SpecNode child = parse_node(cj, path);
    if (!seen.insert(child.name).second) {
      throw ParseError(path, "duplicate sibling name \"" + child.name + "\"");
    }
    node.children.push_back(std::move(child));
  }
  return node;
}

}  // namespace detail

inline SpecTree parse_spec(const Json& document) {
  return SpecTree{detail::parse_node(document, "")};
}

inline SpecTree parse_spec_text(const std::string& text) {
  const Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("", "document is not valid JSON");
  return parse_spec(j);
}

inline SpecTree load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_spec_text(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + (e.path().empty() ? "" : ":" + e.path()),
                     e.what());
  }
}

namespace detail {

struct SplitVariant {
  std::vector<std::string> tokens;
  std::vector<Domain> domains;
};

// All variants of a subtree, in deterministic order: exclusive children are
// taken in declaration order, an optional subtree is included before it is
// excluded, and sibling variants compose by cartesian product with earlier
// siblings varying slowest. Choices nested under a branch that is not taken
// contribute nothing.
inline std::vector<SplitVariant> split_node(const SpecNode& node) {
  if (node.is_leaf()) {
    return {SplitVariant{{}, {*node.domain}}};
  }

  const auto combine_children = [](const SpecNode& n) {
    std::vector<SplitVariant> acc = {SplitVariant{}};
    for (const auto& child : n.children) {
      const std::vector<SplitVariant> child_variants = split_node(child);
      std::vector<SplitVariant> next;
      next.reserve(acc.size() * child_variants.size());
      for (const auto& a : acc) {
        for (const auto& c : child_variants) {
          SplitVariant merged = a;
          merged.tokens.insert(merged.tokens.end(), c.tokens.begin(),
                               c.tokens.end());
          merged.domains.insert(merged.domains.end(), c.domains.begin(),
                                c.domains.end());
          next.push_back(std::move(merged));
        }
      }
      acc = std::move(next);
    }
    return acc;
  };

  switch (node.tag) {
    case NodeTag::Group:
      return combine_children(node);
    case NodeTag::Exclusive: {
      std::vector<SplitVariant> out;
      for (const auto& child : node.children) {
        for (auto& v : split_node(child)) {
          SplitVariant picked;
          picked.tokens.push_back("(" + node.name + "=" + child.name + ")");
          picked.tokens.insert(picked.tokens.end(), v.tokens.begin(),
                               v.tokens.end());
          picked.domains = std::move(v.domains);
          out.push_back(std::move(picked));
        }
      }
      return out;
    }
    case NodeTag::Optional: {
      std::vector<SplitVariant> out;
      for (auto& v : combine_children(node)) {
        SplitVariant included;
        included.tokens.push_back("(" + node.name + "=included)");
        included.tokens.insert(included.tokens.end(), v.tokens.begin(),
                               v.tokens.end());
        included.domains = std::move(v.domains);
        out.push_back(std::move(included));
      }
      out.push_back(SplitVariant{{"(" + node.name + "=excluded)"}, {}});
      return out;
    }
  }
  throw Error("unreachable node tag");
}

}  // namespace detail

// Splits a tagged tree into its disjoint model spaces, one per combination of
// exclusive/optional choices, ordered lexicographically by choice vector.
inline std::vector<ModelSpace> split(const SpecTree& tree) {
  std::vector<ModelSpace> forest;
  for (auto& v : detail::split_node(tree.root)) {
    ModelSpace m;
    if (v.tokens.empty()) {
      m.model_id = "default";
    } else {
      for (std::size_t i = 0; i < v.tokens.size(); ++i) {
        if (i) m.model_id += "/";
        m.model_id += v.tokens[i];
      }
    }
    m.domains = std::move(v.domains);
    forest.push_back(std::move(m));
  }
  return forest;
}

// Draws one value per domain, in domain order. Deterministic for a given
// seeded stream.
inline Assignment sample(const ModelSpace& model, Rng& rng) {
  Assignment a;
  a.model_id = model.model_id;
  for (const auto& d : model.domains) {
    a.values.emplace(d.id, d.sample(rng));
  }
  return a;
}

}  // namespace hypersched
