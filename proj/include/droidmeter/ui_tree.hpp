#pragma once

// UI-tree parsing and page identity. A page dump is parsed into a UiNode
// tree; identity is the structural fingerprint, deliberately insensitive to
// text content and pixel geometry so that a page keeps its identity across
// trivial rendering changes.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "droidmeter/errors.hpp"
#include "droidmeter/xml.hpp"

namespace droidmeter {

struct Rect {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  int center_x() const { return left + (right - left) / 2; }
  int center_y() const { return top + (bottom - top) / 2; }
  bool contains(int x, int y) const {
    return x >= left && x <= right && y >= top && y <= bottom;
  }
  bool operator==(const Rect&) const = default;
};

struct UiNode {
  std::string class_name;
  std::optional<std::string> resource_id;
  std::optional<std::string> text;
  Rect bounds;
  bool clickable = false;
  bool enabled = true;
  std::vector<UiNode> children;
};

struct StateFingerprint {
  std::uint64_t digest = 0;
  int node_count = 0;  // descriptive; page identity is the digest alone

  bool operator==(const StateFingerprint& other) const { return digest == other.digest; }
  auto operator<=>(const StateFingerprint& other) const { return digest <=> other.digest; }
};

struct PathStep {
  int child_index = 0;
  std::string class_name;
  bool operator==(const PathStep&) const = default;
};

struct ElementPath {
  std::vector<PathStep> steps;
  bool operator==(const ElementPath&) const = default;
};

enum class EventKind { Tap, Back };

struct UiEvent {
  EventKind kind = EventKind::Back;
  std::optional<ElementPath> target;            // present iff kind == Tap
  std::optional<std::pair<int, int>> tap_point; // target bounds center at record time

  static UiEvent back() { return UiEvent{}; }
  static UiEvent tap(ElementPath path, std::pair<int, int> point) {
    return UiEvent{EventKind::Tap, std::move(path), point};
  }
};

// Event identity ignores tap_point: the pixel center is a replay aid derived
// from bounds, not part of what the event is.
inline bool same_event(const UiEvent& a, const UiEvent& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == EventKind::Back) return true;
  return a.target == b.target;
}

// --- fingerprint -----------------------------------------------------------

// Digest is FNV-1a 64-bit over a canonical preorder serialization emitting,
// per node, (depth, class_name, resource_id-or-empty, clickable). Text and
// bounds are excluded so the digest survives content and layout changes.
// Rendered externally as 16 lowercase hex digits.

namespace detail {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline void fnv1a(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
}

inline void fnv1a(std::uint64_t& h, char c) {
  h ^= static_cast<unsigned char>(c);
  h *= kFnvPrime;
}

inline void hash_node(std::uint64_t& h, const UiNode& node, int depth, int& count) {
  ++count;
  fnv1a(h, std::to_string(depth));
  fnv1a(h, '\x1f');
  fnv1a(h, node.class_name);
  fnv1a(h, '\x1f');
  if (node.resource_id) fnv1a(h, *node.resource_id);
  fnv1a(h, '\x1f');
  fnv1a(h, node.clickable ? '1' : '0');
  fnv1a(h, '\x1e');
  for (const UiNode& child : node.children) hash_node(h, child, depth + 1, count);
}

}  // namespace detail

inline StateFingerprint fingerprint(const UiNode& root) {
  std::uint64_t h = detail::kFnvOffset;
  int count = 0;
  detail::hash_node(h, root, 0, count);
  return StateFingerprint{h, count};
}

inline std::string to_hex(std::uint64_t digest) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[digest & 0xF];
    digest >>= 4;
  }
  return out;
}

inline std::string to_hex(const StateFingerprint& fp) { return to_hex(fp.digest); }

inline std::optional<std::uint64_t> parse_hex64(std::string_view hex) {
  if (hex.size() != 16) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : hex) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else return std::nullopt;
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

// --- parsing ---------------------------------------------------------------

namespace detail {

inline bool parse_int(std::string_view s, size_t& i, int& out) {
  bool neg = false;
  if (i < s.size() && s[i] == '-') {
    neg = true;
    ++i;
  }
  size_t start = i;
  long v = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
    v = v * 10 + (s[i] - '0');
    ++i;
  }
  if (i == start) return false;
  out = static_cast<int>(neg ? -v : v);
  return true;
}

// "[l,t][r,b]"
inline Rect parse_bounds(std::string_view s) {
  Rect r;
  size_t i = 0;
  auto expect = [&](char c) {
    if (i >= s.size() || s[i] != c)
      throw MalformedDump("bad bounds string '" + std::string(s) + "'");
    ++i;
  };
  expect('[');
  if (!parse_int(s, i, r.left)) throw MalformedDump("bad bounds string '" + std::string(s) + "'");
  expect(',');
  if (!parse_int(s, i, r.top)) throw MalformedDump("bad bounds string '" + std::string(s) + "'");
  expect(']');
  expect('[');
  if (!parse_int(s, i, r.right)) throw MalformedDump("bad bounds string '" + std::string(s) + "'");
  expect(',');
  if (!parse_int(s, i, r.bottom)) throw MalformedDump("bad bounds string '" + std::string(s) + "'");
  expect(']');
  if (i != s.size()) throw MalformedDump("bad bounds string '" + std::string(s) + "'");
  if (r.left > r.right || r.top > r.bottom)
    throw MalformedDump("inverted bounds '" + std::string(s) + "'");
  return r;
}

inline UiNode node_from_element(const xml::Element& el) {
  if (el.name != "node")
    throw MalformedDump("unexpected element '" + el.name + "' in UI dump");
  UiNode node;
  if (const auto* v = el.attribute("class")) node.class_name = *v;
  if (const auto* v = el.attribute("resource-id")) node.resource_id = *v;
  if (const auto* v = el.attribute("text")) node.text = *v;
  const auto* bounds = el.attribute("bounds");
  if (!bounds) throw MalformedDump("node missing bounds attribute");
  node.bounds = parse_bounds(*bounds);
  if (const auto* v = el.attribute("clickable")) node.clickable = (*v == "true");
  if (const auto* v = el.attribute("enabled")) node.enabled = (*v == "true");
  node.children.reserve(el.children.size());
  for (const xml::Element& child : el.children)
    node.children.push_back(node_from_element(child));
  return node;
}

}  // namespace detail

// Parses a uiautomator-style dump. Accepts either a bare <node> root or the
// usual <hierarchy> wrapper around a single <node>.
inline UiNode parse_ui_dump(std::string_view xml_text) {
  xml::Element root;
  try {
    root = xml::parse(xml_text);
  } catch (const xml::ParseError& e) {
    throw MalformedDump(e.what());
  }
  if (root.name == "hierarchy") {
    if (root.children.size() != 1)
      throw MalformedDump("hierarchy element must contain exactly one node");
    return detail::node_from_element(root.children[0]);
  }
  return detail::node_from_element(root);
}

// Serializes back to the dump dialect; document order is preserved, so
// parse(serialize(parse(x))) == parse(x).
inline void serialize_node(std::string& out, const UiNode& node) {
  out += "<node class=\"";
  xml::escape_into(out, node.class_name);
  out += '"';
  if (node.resource_id) {
    out += " resource-id=\"";
    xml::escape_into(out, *node.resource_id);
    out += '"';
  }
  if (node.text) {
    out += " text=\"";
    xml::escape_into(out, *node.text);
    out += '"';
  }
  out += " bounds=\"[" + std::to_string(node.bounds.left) + "," +
         std::to_string(node.bounds.top) + "][" + std::to_string(node.bounds.right) +
         "," + std::to_string(node.bounds.bottom) + "]\"";
  out += node.clickable ? " clickable=\"true\"" : " clickable=\"false\"";
  out += node.enabled ? " enabled=\"true\"" : " enabled=\"false\"";
  if (node.children.empty()) {
    out += "/>";
    return;
  }
  out += '>';
  for (const UiNode& child : node.children) serialize_node(out, child);
  out += "</node>";
}

inline std::string serialize_ui_dump(const UiNode& root) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>";
  serialize_node(out, root);
  return out;
}

// --- elements and events ---------------------------------------------------

// A page embeds a web view when any widget is android.webkit.WebView or a
// subclass of it by naming convention: the simple class name (after the last
// dot) ends with "WebView". Catches com.example.MyWebView as well as
// vendor.pkg.WebView.
inline bool contains_webview(const UiNode& root) {
  const std::string& c = root.class_name;
  const size_t dot = c.rfind('.');
  const std::string_view simple =
      dot == std::string::npos ? std::string_view(c) : std::string_view(c).substr(dot + 1);
  constexpr std::string_view kSuffix = "WebView";
  if (simple.size() >= kSuffix.size() &&
      simple.substr(simple.size() - kSuffix.size()) == kSuffix)
    return true;
  for (const UiNode& child : root.children)
    if (contains_webview(child)) return true;
  return false;
}

inline const UiNode& resolve_path(const UiNode& root, const ElementPath& path) {
  const UiNode* cur = &root;
  for (size_t depth = 0; depth < path.steps.size(); ++depth) {
    const PathStep& step = path.steps[depth];
    if (step.child_index < 0 ||
        static_cast<size_t>(step.child_index) >= cur->children.size())
      throw PathMismatch("child index " + std::to_string(step.child_index) +
                         " out of range at step " + std::to_string(depth));
    const UiNode& child = cur->children[static_cast<size_t>(step.child_index)];
    if (child.class_name != step.class_name)
      throw PathMismatch("class '" + child.class_name + "' != expected '" +
                         step.class_name + "' at step " + std::to_string(depth));
    cur = &child;
  }
  return *cur;
}

namespace detail {

inline bool find_path(const UiNode& cur, const UiNode* target, ElementPath& path) {
  if (&cur == target) return true;
  for (size_t i = 0; i < cur.children.size(); ++i) {
    path.steps.push_back({static_cast<int>(i), cur.children[i].class_name});
    if (find_path(cur.children[i], target, path)) return true;
    path.steps.pop_back();
  }
  return false;
}

}  // namespace detail

// Path from root to a node of the same tree (addressed by identity).
inline ElementPath element_path(const UiNode& root, const UiNode& target) {
  ElementPath path;
  if (!detail::find_path(root, &target, path))
    throw PathMismatch("target node is not part of the given tree");
  return path;
}

// One Tap per clickable+enabled node in preorder, then one trailing Back so
// a depth-first explorer can always retreat.
inline std::vector<UiEvent> enumerate_actionable(const UiNode& root) {
  std::vector<UiEvent> events;
  ElementPath path;
  auto walk = [&](auto&& self, const UiNode& node) -> void {
    if (node.clickable && node.enabled) {
      events.push_back(UiEvent::tap(path, {node.bounds.center_x(), node.bounds.center_y()}));
    }
    for (size_t i = 0; i < node.children.size(); ++i) {
      path.steps.push_back({static_cast<int>(i), node.children[i].class_name});
      self(self, node.children[i]);
      path.steps.pop_back();
    }
  };
  walk(walk, root);
  events.push_back(UiEvent::back());
  return events;
}

// --- JSON encoding of events (shared by scripts, models, scenarios) --------

inline nlohmann::json to_json(const ElementPath& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const PathStep& step : path.steps)
    arr.push_back(nlohmann::json::array({step.child_index, step.class_name}));
  return arr;
}

inline ElementPath element_path_from_json(const nlohmann::json& j) {
  ElementPath path;
  for (const auto& step : j)
    path.steps.push_back({step.at(0).get<int>(), step.at(1).get<std::string>()});
  return path;
}

inline nlohmann::json to_json(const UiEvent& event) {
  nlohmann::json j;
  if (event.kind == EventKind::Back) {
    j["kind"] = "back";
    return j;
  }
  j["kind"] = "tap";
  j["path"] = to_json(*event.target);
  if (event.tap_point)
    j["point"] = nlohmann::json::array({event.tap_point->first, event.tap_point->second});
  return j;
}

inline UiEvent event_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "back") return UiEvent::back();
  if (kind != "tap") throw IoError("unknown event kind '" + kind + "'");
  UiEvent ev;
  ev.kind = EventKind::Tap;
  ev.target = element_path_from_json(j.at("path"));
  if (j.contains("point") && !j["point"].is_null())
    ev.tap_point = {j["point"].at(0).get<int>(), j["point"].at(1).get<int>()};
  return ev;
}

// Canonical key for (from, event) lookups; ignores tap_point like same_event.
inline std::string event_key(const UiEvent& event) {
  if (event.kind == EventKind::Back) return "back";
  std::string key = "tap";
  for (const PathStep& step : event.target->steps) {
    key += '/';
    key += std::to_string(step.child_index);
    key += ':';
    key += step.class_name;
  }
  return key;
}

}  // namespace droidmeter
