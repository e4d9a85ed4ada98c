#pragma once

// Page-transition state machine built during exploration. States are keyed
// by structural fingerprint; edges are UI events observed to cause a
// transition. Single writer (the explorer); reads may run concurrently only
// with no writer present.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "droidmeter/errors.hpp"
#include "droidmeter/ui_tree.hpp"

namespace droidmeter {

struct PageState {
  StateFingerprint fingerprint;
  std::string activity_name;
  bool has_webview = false;
  std::int64_t first_seen_at = 0;  // ms since run start
  std::optional<std::string> screenshot_ref;
  std::vector<UiEvent> unexplored_events;
};

struct Transition {
  StateFingerprint from;
  UiEvent event;
  StateFingerprint to;
  bool tainted = false;  // nondeterministic re-observation; excluded from pathing
};

class TransitionModel {
 public:
  TransitionModel() = default;

  // Registers the entry page. Must be called exactly once before observations.
  static TransitionModel with_entry(const UiNode& entry_tree, const std::string& activity,
                                    std::int64_t now_ms) {
    TransitionModel model;
    model.entry_ = model.register_state(entry_tree, activity, now_ms).first;
    return model;
  }

  struct Observation {
    StateFingerprint to;
    bool is_new_state = false;
  };

  // Records one observed (from, event) -> to_tree step. Inserts the
  // destination state if unseen. A (from, event) pair re-observed with a
  // different destination keeps the first recording, taints the edge, and
  // raises NondeterministicEdge.
  Observation add_observation(const StateFingerprint& from, const UiEvent& event,
                              const UiNode& to_tree, const std::string& activity,
                              std::int64_t now_ms) {
    if (!index_.count(from.digest))
      throw Error("add_observation: unknown source state " + to_hex(from));
    auto [to, is_new] = register_state(to_tree, activity, now_ms);
    consume_unexplored(from, event);

    auto edge_it = edge_index_.find(edge_key(from, event));
    if (edge_it != edge_index_.end()) {
      Transition& existing = transitions_[edge_it->second];
      if (existing.to.digest != to.digest) {
        existing.tainted = true;
        throw NondeterministicEdge(
            "edge " + to_hex(from) + " --" + event_key(event) + "--> observed " +
                to_hex(to) + " but recorded " + to_hex(existing.to),
            to.digest);
      }
      return {to, is_new};
    }
    edge_index_[edge_key(from, event)] = transitions_.size();
    transitions_.push_back({from, event, to, false});
    return {to, is_new};
  }

  // Breadth-first shortest event path from entry to target over untainted
  // edges. Empty iff target == entry. Throws Unreachable when no path exists.
  std::vector<std::pair<StateFingerprint, UiEvent>> shortest_event_path(
      const StateFingerprint& target) const {
    if (!index_.count(target.digest))
      throw Unreachable("state " + to_hex(target) + " is not in the model");
    auto [dist, parent] = bfs_from_entry();
    if (!dist.count(target.digest))
      throw Unreachable("no path from entry to " + to_hex(target));
    std::vector<std::pair<StateFingerprint, UiEvent>> path;
    std::uint64_t cur = target.digest;
    while (cur != entry_.digest) {
      const Transition& t = transitions_[parent.at(cur)];
      path.push_back({t.from, t.event});
      cur = t.from.digest;
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  // BFS distances from entry (untainted edges only), adjacency in recorded
  // order so paths are reproducible. Also usable as the depth map.
  std::pair<std::unordered_map<std::uint64_t, int>,
            std::unordered_map<std::uint64_t, size_t>>
  bfs_from_entry() const {
    std::unordered_map<std::uint64_t, int> dist;
    std::unordered_map<std::uint64_t, size_t> parent;  // state -> incoming edge index
    std::deque<std::uint64_t> queue;
    dist[entry_.digest] = 0;
    queue.push_back(entry_.digest);
    while (!queue.empty()) {
      std::uint64_t cur = queue.front();
      queue.pop_front();
      for (size_t i = 0; i < transitions_.size(); ++i) {
        const Transition& t = transitions_[i];
        if (t.tainted || t.from.digest != cur) continue;
        if (dist.count(t.to.digest)) continue;
        dist[t.to.digest] = dist[cur] + 1;
        parent[t.to.digest] = i;
        queue.push_back(t.to.digest);
      }
    }
    return {std::move(dist), std::move(parent)};
  }

  // All webview states in first-seen order.
  std::vector<StateFingerprint> webview_states() const {
    std::vector<StateFingerprint> out;
    for (const PageState& s : states_)
      if (s.has_webview) out.push_back(s.fingerprint);
    return out;
  }

  const StateFingerprint& entry() const { return entry_; }
  const std::vector<PageState>& states() const { return states_; }
  const std::vector<Transition>& transitions() const { return transitions_; }

  const PageState* find_state(const StateFingerprint& fp) const {
    auto it = index_.find(fp.digest);
    return it == index_.end() ? nullptr : &states_[it->second];
  }

  PageState* find_state(const StateFingerprint& fp) {
    auto it = index_.find(fp.digest);
    return it == index_.end() ? nullptr : &states_[it->second];
  }

  bool has_state(const StateFingerprint& fp) const { return index_.count(fp.digest) > 0; }

  void set_screenshot_ref(const StateFingerprint& fp, const std::string& ref) {
    if (PageState* s = find_state(fp)) s->screenshot_ref = ref;
  }

  // Removes one pending event from a state's unexplored list (front or by
  // identity). Returns the event, or nullopt when none left.
  std::optional<UiEvent> pop_unexplored(const StateFingerprint& fp) {
    PageState* s = find_state(fp);
    if (!s || s->unexplored_events.empty()) return std::nullopt;
    UiEvent ev = s->unexplored_events.front();
    s->unexplored_events.erase(s->unexplored_events.begin());
    return ev;
  }

  // --- persistence ---------------------------------------------------------

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["entry"] = to_hex(entry_);
    nlohmann::json states = nlohmann::json::array();
    for (const PageState& s : states_) {
      nlohmann::json js;
      js["fingerprint"] = to_hex(s.fingerprint);
      js["node_count"] = s.fingerprint.node_count;
      js["activity"] = s.activity_name;
      js["has_webview"] = s.has_webview;
      js["first_seen_ms"] = s.first_seen_at;
      js["screenshot"] = s.screenshot_ref ? nlohmann::json(*s.screenshot_ref)
                                          : nlohmann::json(nullptr);
      nlohmann::json pending = nlohmann::json::array();
      for (const UiEvent& ev : s.unexplored_events) pending.push_back(droidmeter::to_json(ev));
      js["unexplored"] = std::move(pending);
      states.push_back(std::move(js));
    }
    j["states"] = std::move(states);
    nlohmann::json transitions = nlohmann::json::array();
    for (const Transition& t : transitions_) {
      nlohmann::json jt;
      jt["from"] = to_hex(t.from);
      jt["event"] = droidmeter::to_json(t.event);
      jt["to"] = to_hex(t.to);
      jt["tainted"] = t.tainted;
      transitions.push_back(std::move(jt));
    }
    j["transitions"] = std::move(transitions);
    return j;
  }

  static TransitionModel from_json(const nlohmann::json& j) {
    TransitionModel model;
    for (const auto& js : j.at("states")) {
      PageState s;
      s.fingerprint.digest = parse_fp(js.at("fingerprint").get<std::string>());
      s.fingerprint.node_count = js.at("node_count").get<int>();
      s.activity_name = js.at("activity").get<std::string>();
      s.has_webview = js.at("has_webview").get<bool>();
      s.first_seen_at = js.at("first_seen_ms").get<std::int64_t>();
      if (js.contains("screenshot") && !js["screenshot"].is_null())
        s.screenshot_ref = js["screenshot"].get<std::string>();
      for (const auto& ev : js.at("unexplored"))
        s.unexplored_events.push_back(event_from_json(ev));
      model.index_[s.fingerprint.digest] = model.states_.size();
      model.states_.push_back(std::move(s));
    }
    for (const auto& jt : j.at("transitions")) {
      Transition t;
      t.from.digest = parse_fp(jt.at("from").get<std::string>());
      t.event = event_from_json(jt.at("event"));
      t.to.digest = parse_fp(jt.at("to").get<std::string>());
      t.tainted = jt.at("tainted").get<bool>();
      auto fill = [&](StateFingerprint& fp) {
        if (const auto it = model.index_.find(fp.digest); it != model.index_.end())
          fp.node_count = model.states_[it->second].fingerprint.node_count;
      };
      fill(t.from);
      fill(t.to);
      model.edge_index_[edge_key(t.from, t.event)] = model.transitions_.size();
      model.transitions_.push_back(std::move(t));
    }
    model.entry_.digest = parse_fp(j.at("entry").get<std::string>());
    if (const PageState* s = model.find_state(model.entry_))
      model.entry_ = s->fingerprint;
    model.validate();
    return model;
  }

  // Structural invariants: entry is a state, every edge endpoint is a state,
  // fingerprints are unique state keys.
  void validate() const {
    if (!index_.count(entry_.digest)) throw Error("model invariant: entry not in states");
    if (index_.size() != states_.size())
      throw Error("model invariant: duplicate fingerprints");
    for (const Transition& t : transitions_) {
      if (!index_.count(t.from.digest) || !index_.count(t.to.digest))
        throw Error("model invariant: transition endpoint not in states");
    }
  }

 private:
  static std::uint64_t parse_fp(const std::string& hex) {
    auto v = parse_hex64(hex);
    if (!v) throw IoError("bad fingerprint hex '" + hex + "'");
    return *v;
  }

  static std::string edge_key(const StateFingerprint& from, const UiEvent& event) {
    return to_hex(from) + '|' + event_key(event);
  }

  std::pair<StateFingerprint, bool> register_state(const UiNode& tree,
                                                   const std::string& activity,
                                                   std::int64_t now_ms) {
    StateFingerprint fp = droidmeter::fingerprint(tree);
    if (auto it = index_.find(fp.digest); it != index_.end())
      return {states_[it->second].fingerprint, false};
    PageState s;
    s.fingerprint = fp;
    s.activity_name = activity;
    s.has_webview = contains_webview(tree);
    s.first_seen_at = now_ms;
    s.unexplored_events = enumerate_actionable(tree);
    index_[fp.digest] = states_.size();
    states_.push_back(std::move(s));
    return {fp, true};
  }

  void consume_unexplored(const StateFingerprint& from, const UiEvent& event) {
    PageState* s = find_state(from);
    if (!s) return;
    auto& pending = s->unexplored_events;
    for (auto it = pending.begin(); it != pending.end(); ++it) {
      if (same_event(*it, event)) {
        pending.erase(it);
        return;
      }
    }
  }

  StateFingerprint entry_;
  std::vector<PageState> states_;                       // first-seen order
  std::vector<Transition> transitions_;                 // recorded order
  std::unordered_map<std::uint64_t, size_t> index_;     // digest -> states_ index
  std::unordered_map<std::string, size_t> edge_index_;  // (from,event) -> transitions_ index
};

}  // namespace droidmeter
