#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ffcn {

enum class Role : std::uint8_t { hand, object };

enum class Kind : std::uint8_t { verb = 0, prep = 1, noun = 2 };

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::verb: return "verb";
    case Kind::prep: return "prep";
    case Kind::noun: return "noun";
  }
  return "?";
}

/// Normalized box: center plus extents, with slack for off-screen motion.
struct BBoxFeature {
  double cx = 0, cy = 0, w = 0, h = 0;
};

struct OrderItem {
  Kind kind;
  int index;  // position within its kind list
  bool operator==(const OrderItem&) const = default;
};

/// Ordered verb/preposition/noun component sequence defining a class template.
struct ActionDescription {
  std::vector<int> verbs;
  std::vector<int> preps;
  std::vector<int> nouns;
  std::vector<OrderItem> order;

  int count(Kind k) const {
    switch (k) {
      case Kind::verb: return static_cast<int>(verbs.size());
      case Kind::prep: return static_cast<int>(preps.size());
      case Kind::noun: return static_cast<int>(nouns.size());
    }
    return 0;
  }

  int component_id(Kind k, int idx) const {
    switch (k) {
      case Kind::verb: return verbs.at(static_cast<std::size_t>(idx));
      case Kind::prep: return preps.at(static_cast<std::size_t>(idx));
      case Kind::noun: return nouns.at(static_cast<std::size_t>(idx));
    }
    return -1;
  }
};

/// One action clip: T frames x N instance slots.
struct VideoSample {
  std::string id;
  int T = 0;
  int N = 0;
  int A = 0;
  std::vector<Role> roles;          // N
  std::vector<BBoxFeature> boxes;   // T*N, frame-major
  std::vector<std::uint8_t> present;  // T*N
  std::vector<double> appearance;   // N*T*A, slot-major
  int label = -1;
  ActionDescription desc;

  const BBoxFeature& box(int t, int n) const { return boxes[static_cast<std::size_t>(t * N + n)]; }
  BBoxFeature& box(int t, int n) { return boxes[static_cast<std::size_t>(t * N + n)]; }
  bool is_present(int t, int n) const { return present[static_cast<std::size_t>(t * N + n)] != 0; }
  const double* appearance_at(int n, int t) const {
    return appearance.data() + (static_cast<std::size_t>(n) * static_cast<std::size_t>(T) + static_cast<std::size_t>(t)) * static_cast<std::size_t>(A);
  }
  double* appearance_at(int n, int t) {
    return appearance.data() + (static_cast<std::size_t>(n) * static_cast<std::size_t>(T) + static_cast<std::size_t>(t)) * static_cast<std::size_t>(A);
  }

  /// True when the slot never appears in any frame.
  bool fully_absent(int n) const {
    for (int t = 0; t < T; ++t)
      if (is_present(t, n)) return false;
    return true;
  }
};

/// Directed slot-index pairs of one disentangled sub-graph.
struct EdgeSet {
  Kind kind = Kind::verb;
  std::vector<std::pair<int, int>> pairs;

  std::size_t size() const { return pairs.size(); }
};

// ---------------------------------------------------------------------------
// dataset record format: one JSON object per line
// ---------------------------------------------------------------------------

inline nlohmann::json description_to_json(const ActionDescription& d) {
  nlohmann::json j;
  j["verbs"] = d.verbs;
  j["preps"] = d.preps;
  j["nouns"] = d.nouns;
  std::vector<std::string> order;
  for (const auto& o : d.order) {
    const char tag = o.kind == Kind::verb ? 'v' : o.kind == Kind::prep ? 'p' : 'n';
    order.push_back(std::string(1, tag) + std::to_string(o.index));
  }
  j["order"] = order;
  return j;
}

inline ActionDescription description_from_json(const nlohmann::json& j) {
  ActionDescription d;
  d.verbs = j.at("verbs").get<std::vector<int>>();
  d.preps = j.at("preps").get<std::vector<int>>();
  d.nouns = j.at("nouns").get<std::vector<int>>();
  for (const auto& s : j.at("order").get<std::vector<std::string>>()) {
    if (s.size() < 2) throw std::invalid_argument("bad order item: " + s);
    Kind k = s[0] == 'v' ? Kind::verb : s[0] == 'p' ? Kind::prep : Kind::noun;
    d.order.push_back({k, std::stoi(s.substr(1))});
  }
  return d;
}

inline nlohmann::json sample_to_json(const VideoSample& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["T"] = s.T;
  j["N"] = s.N;
  std::vector<std::string> roles;
  for (Role r : s.roles) roles.push_back(r == Role::hand ? "hand" : "object");
  j["roles"] = roles;
  auto boxes = nlohmann::json::array();
  for (int t = 0; t < s.T; ++t) {
    auto row = nlohmann::json::array();
    for (int n = 0; n < s.N; ++n) {
      const auto& b = s.box(t, n);
      row.push_back({b.cx, b.cy, b.w, b.h});
    }
    boxes.push_back(std::move(row));
  }
  j["boxes"] = std::move(boxes);
  auto present = nlohmann::json::array();
  for (int t = 0; t < s.T; ++t) {
    std::vector<int> row(static_cast<std::size_t>(s.N));
    for (int n = 0; n < s.N; ++n) row[static_cast<std::size_t>(n)] = s.is_present(t, n) ? 1 : 0;
    present.push_back(row);
  }
  j["present"] = std::move(present);
  auto app = nlohmann::json::array();
  for (int n = 0; n < s.N; ++n) {
    auto per_slot = nlohmann::json::array();
    for (int t = 0; t < s.T; ++t) {
      const double* a = s.appearance_at(n, t);
      per_slot.push_back(std::vector<double>(a, a + s.A));
    }
    app.push_back(std::move(per_slot));
  }
  j["appearance"] = std::move(app);
  j["label"] = s.label;
  j["description"] = description_to_json(s.desc);
  return j;
}

inline VideoSample sample_from_json(const nlohmann::json& j) {
  VideoSample s;
  s.id = j.at("id").get<std::string>();
  s.T = j.at("T").get<int>();
  s.N = j.at("N").get<int>();
  for (const auto& r : j.at("roles")) s.roles.push_back(r.get<std::string>() == "hand" ? Role::hand : Role::object);
  s.boxes.resize(static_cast<std::size_t>(s.T * s.N));
  const auto& boxes = j.at("boxes");
  for (int t = 0; t < s.T; ++t)
    for (int n = 0; n < s.N; ++n) {
      const auto& b = boxes.at(static_cast<std::size_t>(t)).at(static_cast<std::size_t>(n));
      s.box(t, n) = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
    }
  s.present.resize(static_cast<std::size_t>(s.T * s.N));
  const auto& present = j.at("present");
  for (int t = 0; t < s.T; ++t)
    for (int n = 0; n < s.N; ++n)
      s.present[static_cast<std::size_t>(t * s.N + n)] =
          static_cast<std::uint8_t>(present.at(static_cast<std::size_t>(t)).at(static_cast<std::size_t>(n)).get<int>());
  const auto& app = j.at("appearance");
  s.A = app.empty() || app.at(0).empty() ? 0 : static_cast<int>(app.at(0).at(0).size());
  s.appearance.resize(static_cast<std::size_t>(s.N) * static_cast<std::size_t>(s.T) * static_cast<std::size_t>(s.A));
  for (int n = 0; n < s.N; ++n)
    for (int t = 0; t < s.T; ++t) {
      const auto& vec = app.at(static_cast<std::size_t>(n)).at(static_cast<std::size_t>(t));
      double* dst = s.appearance_at(n, t);
      for (int a = 0; a < s.A; ++a) dst[static_cast<std::size_t>(a)] = vec.at(static_cast<std::size_t>(a)).get<double>();
    }
  s.label = j.at("label").get<int>();
  s.desc = description_from_json(j.at("description"));
  return s;
}

/// Ingestion-time validation of the sample invariants.
inline void validate_sample(const VideoSample& s, int expected_T, int expected_hands = 1) {
  if (s.T != expected_T)
    throw std::invalid_argument("sample " + s.id + ": clip length " + std::to_string(s.T) +
                                " does not match configured " + std::to_string(expected_T));
  int hands = 0;
  for (Role r : s.roles)
    if (r == Role::hand) ++hands;
  if (hands != expected_hands)
    throw std::invalid_argument("sample " + s.id + ": expected " + std::to_string(expected_hands) +
                                " hand slot(s), got " + std::to_string(hands));
  for (int t = 0; t < s.T; ++t)
    for (int n = 0; n < s.N; ++n) {
      const auto& b = s.box(t, n);
      for (double v : {b.cx, b.cy, b.w, b.h}) {
        if (!std::isfinite(v) || v < -0.5 || v > 1.5)
          throw std::invalid_argument("sample " + s.id + ": box component out of [-0.5, 1.5]");
        if (!s.is_present(t, n) && v != 0.0)
          throw std::invalid_argument("sample " + s.id + ": absent slot carries nonzero box");
      }
    }
  const std::size_t total = s.desc.verbs.size() + s.desc.preps.size() + s.desc.nouns.size();
  if (s.desc.order.size() != total)
    throw std::invalid_argument("sample " + s.id + ": order is not a permutation of the components");
  std::vector<int> seen[3];
  for (const auto& o : s.desc.order) {
    auto& v = seen[static_cast<int>(o.kind)];
    if (o.index < 0 || o.index >= s.desc.count(o.kind))
      throw std::invalid_argument("sample " + s.id + ": order references missing component");
    for (int prior : v)
      if (prior == o.index) throw std::invalid_argument("sample " + s.id + ": order repeats a component");
    v.push_back(o.index);
  }
}

}  // namespace ffcn
