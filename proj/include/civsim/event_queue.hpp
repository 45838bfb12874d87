#pragma once

// Single-timeline discrete-event scheduler and the event trace.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "civsim/core.hpp"

namespace civsim::simnet {

class EventQueue {
 public:
  using Handler = std::function<void()>;
  using EventId = std::uint64_t;

  SimTime now() const noexcept { return now_; }
  bool empty() const noexcept { return pending_.empty(); }
  std::size_t executed() const noexcept { return executed_; }

  // Events at equal timestamps run in insertion order.
  EventId schedule_at(SimTime at, Handler handler) {
    if (at < now_) throw Error(ErrorCode::InvalidState, "event scheduled in the past");
    const EventId id = next_id_++;
    pending_.insert(id);
    queue_.push(Entry{at, id, std::move(handler)});
    return id;
  }

  EventId schedule_after(SimDuration delay, Handler handler) {
    return schedule_at(now_ + delay, std::move(handler));
  }

  void cancel(EventId id) {
    if (pending_.erase(id) > 0) cancelled_.insert(id);
  }

  // Runs the next live event; false when nothing is pending.
  bool step() {
    while (!queue_.empty()) {
      Entry top = std::move(const_cast<Entry&>(queue_.top()));
      queue_.pop();
      if (auto it = cancelled_.find(top.id); it != cancelled_.end()) {
        cancelled_.erase(it);
        continue;
      }
      pending_.erase(top.id);
      now_ = top.at;
      ++executed_;
      top.handler();
      return true;
    }
    return false;
  }

  // Runs until the queue drains or the next event lies beyond `limit`.
  void run(SimTime limit = SimTime::max()) {
    while (!queue_.empty()) {
      if (queue_.top().at > limit) break;
      if (!step()) break;
    }
  }

 private:
  struct Entry {
    SimTime at;
    EventId id;
    Handler handler;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.at != b.at ? a.at > b.at : a.id > b.id;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::unordered_set<EventId> pending_;
  std::unordered_set<EventId> cancelled_;
  SimTime now_{0};
  EventId next_id_ = 1;
  std::size_t executed_ = 0;
};

struct TraceRecord {
  SimTime at;
  std::string endpoint;
  std::string event;
  std::string payload;
};

// Line-delimited record of every state transition in a run. A disabled
// trace costs nothing beyond the enabled() check.
class Trace {
 public:
  explicit Trace(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const noexcept { return enabled_; }

  void add(SimTime at, std::string endpoint, std::string event, std::string payload = {}) {
    if (!enabled_) return;
    records_.push_back({at, std::move(endpoint), std::move(event), std::move(payload)});
  }

  const std::vector<TraceRecord>& records() const noexcept { return records_; }

  // "<ms>\t<endpoint>\t<event>\t<payload>\n" per record, ms with 3 decimals.
  std::string to_text() const {
    std::string out;
    char stamp[32];
    for (const auto& r : records_) {
      const auto us = r.at.count();
      std::snprintf(stamp, sizeof stamp, "%lld.%03lld", static_cast<long long>(us / 1000),
                    static_cast<long long>(us % 1000));
      out += stamp;
      out += '\t';
      out += r.endpoint;
      out += '\t';
      out += r.event;
      out += '\t';
      out += r.payload;
      out += '\n';
    }
    return out;
  }

 private:
  bool enabled_;
  std::vector<TraceRecord> records_;
};

}  // namespace civsim::simnet
