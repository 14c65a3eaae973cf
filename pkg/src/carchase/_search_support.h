// Containers for the compiled low-level search: hashed state keys, the open
// list and the heuristic cache. The search logic itself lives in _csearch.pyx.
#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

static inline uint64_t cc_mix64(uint64_t h) {
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
    return h ^ (h >> 31);
}

struct SKey {
    int32_t cx, cy, hb, t;
    bool operator==(const SKey& o) const { return cx == o.cx && cy == o.cy && hb == o.hb && t == o.t; }
};

struct CKey {
    int32_t agent, cx, cy, hb, t, ctx;
    bool operator==(const CKey& o) const {
        return agent == o.agent && cx == o.cx && cy == o.cy && hb == o.hb && t == o.t && ctx == o.ctx;
    }
};

namespace std {
template <> struct hash<SKey> {
    size_t operator()(const SKey& k) const {
        uint64_t a = ((uint64_t)(uint32_t)k.cx << 32) | (uint32_t)k.cy;
        uint64_t b = ((uint64_t)(uint32_t)k.hb << 32) | (uint32_t)k.t;
        return (size_t)cc_mix64(a ^ cc_mix64(b));
    }
};
template <> struct hash<CKey> {
    size_t operator()(const CKey& k) const {
        uint64_t a = ((uint64_t)(uint32_t)k.cx << 32) | (uint32_t)k.cy;
        uint64_t b = ((uint64_t)(uint32_t)k.hb << 32) | (uint32_t)k.t;
        uint64_t c = ((uint64_t)(uint32_t)k.agent << 32) | (uint32_t)k.ctx;
        return (size_t)cc_mix64(a ^ cc_mix64(b ^ cc_mix64(c)));
    }
};
}  // namespace std

struct IdsHash {
    size_t operator()(const std::vector<int64_t>& v) const {
        uint64_t h = 0xCBF29CE484222325ULL;
        for (int64_t x : v) h = (h ^ (uint64_t)x) * 0x100000001B3ULL;
        return (size_t)cc_mix64(h);
    }
};

// Open-list entry ordered like the tuple (f, -g, (cx, cy, hb, t), node id).
struct OpenItem {
    double f, ng;
    int32_t cx, cy, hb, t;
    int32_t nid;
};

static inline bool open_less(const OpenItem& a, const OpenItem& b) {
    if (a.f != b.f) return a.f < b.f;
    if (a.ng != b.ng) return a.ng < b.ng;
    if (a.cx != b.cx) return a.cx < b.cx;
    if (a.cy != b.cy) return a.cy < b.cy;
    if (a.hb != b.hb) return a.hb < b.hb;
    if (a.t != b.t) return a.t < b.t;
    return a.nid < b.nid;
}

struct OpenGreater {
    bool operator()(const OpenItem& a, const OpenItem& b) const { return open_less(b, a); }
};

struct OpenList {
    std::vector<OpenItem> v;
    bool empty() const { return v.empty(); }
    void push(const OpenItem& it) {
        v.push_back(it);
        std::push_heap(v.begin(), v.end(), OpenGreater());
    }
    OpenItem pop() {
        std::pop_heap(v.begin(), v.end(), OpenGreater());
        OpenItem it = v.back();
        v.pop_back();
        return it;
    }
};

// Byte model per entry, identical to the Python caches.
static const int64_t CC_KEY_BYTES = 12, CC_VALUE_BYTES = 8, CC_SLOT_OVERHEAD = 32;
static const int64_t CC_BITSET_BYTES = 32, CC_HASH_BYTES = 8, CC_OVERFLOW_ID_BYTES = 8, CC_SUMMARY_BYTES = 16;
static const int64_t CC_CONTEXT_BYTES = 8;
static const int64_t CC_ID_BITS = 256;

struct CacheCore {
    int mode = 0;  // 1 conflict-aware, 2 state-only
    int64_t capacity = 1;
    // interned constraint-id sets (sorted, unique)
    std::unordered_map<std::vector<int64_t>, int32_t, IdsHash> ctx_ids;
    std::vector<int64_t> ctx_bytes;
    // conflict-aware: (agent, state, fingerprint) -> value
    std::unordered_map<CKey, double> ca;
    std::deque<CKey> ca_order;
    // state-only: (agent, state) -> (context, value); ctx field of the key is unused
    std::unordered_map<CKey, std::pair<int32_t, double>> so;
    std::deque<CKey> so_order;
    int64_t lookups = 0, hits = 0, misses = 0, evictions = 0, entries = 0, approx_bytes = 0, peak = 0;

    int32_t intern(const std::vector<int64_t>& ids) {
        auto it = ctx_ids.find(ids);
        if (it != ctx_ids.end()) return it->second;
        int32_t id = (int32_t)ctx_bytes.size();
        int64_t over = 0;
        for (int64_t x : ids)
            if (x >= CC_ID_BITS) over++;
        ctx_bytes.push_back(CC_BITSET_BYTES + CC_HASH_BYTES + CC_OVERFLOW_ID_BYTES * over +
                            CC_SUMMARY_BYTES * (int64_t)ids.size());
        ctx_ids.emplace(ids, id);
        return id;
    }

    int64_t ca_entry_bytes(int32_t ctx) const {
        return CC_KEY_BYTES + ctx_bytes[ctx] + CC_VALUE_BYTES + CC_SLOT_OVERHEAD;
    }

    // Returns true and sets *out on a hit; on a miss the caller computes and calls store().
    bool find(const CKey& k, double* out) {
        lookups++;
        if (mode == 1) {
            auto it = ca.find(k);
            if (it != ca.end()) {
                hits++;
                *out = it->second;
                return true;
            }
        } else {
            CKey s = k;
            s.ctx = 0;
            auto it = so.find(s);
            if (it != so.end() && it->second.first == k.ctx) {
                hits++;
                *out = it->second.second;
                return true;
            }
        }
        misses++;
        return false;
    }

    void store(const CKey& k, double v) {
        if (mode == 1) {
            if ((int64_t)ca.size() >= capacity) ca_evict();
            ca.emplace(k, v);
            ca_order.push_back(k);
            approx_bytes += ca_entry_bytes(k.ctx);
            entries = (int64_t)ca.size();
            if (entries > peak) peak = entries;
        } else {
            CKey s = k;
            s.ctx = 0;
            auto it = so.find(s);
            if (it == so.end()) {
                so_evict();
                so.emplace(s, std::make_pair(k.ctx, v));
                so_order.push_back(s);
            } else {
                it->second = std::make_pair(k.ctx, v);
            }
            so_sync();
        }
    }

    int64_t drop_count(int64_t n) const {
        int64_t keep = capacity / 2 - 1;
        return n - (keep > 0 ? keep : 0);
    }

    void ca_evict() {
        int64_t n = (int64_t)ca.size();
        if (n < capacity) return;
        int64_t drop = drop_count(n);
        for (int64_t i = 0; i < drop; i++) {
            CKey k = ca_order.front();
            ca_order.pop_front();
            ca.erase(k);
            approx_bytes -= ca_entry_bytes(k.ctx);
        }
        evictions += drop;
        entries = (int64_t)ca.size();
    }

    void so_evict() {
        int64_t n = (int64_t)so.size();
        if (n < capacity) return;
        int64_t drop = drop_count(n);
        for (int64_t i = 0; i < drop; i++) {
            so.erase(so_order.front());
            so_order.pop_front();
        }
        evictions += drop;
        so_sync();
    }

    void so_sync() {
        entries = (int64_t)so.size();
        approx_bytes = entries * (CC_KEY_BYTES + CC_CONTEXT_BYTES + CC_VALUE_BYTES + CC_SLOT_OVERHEAD);
        if (entries > peak) peak = entries;
    }

    int64_t size() const { return mode == 1 ? (int64_t)ca.size() : (int64_t)so.size(); }

    double distinct_per_key() const {
        if (mode != 1) return so.empty() ? 0.0 : 1.0;
        std::unordered_map<CKey, int64_t> per;
        for (const auto& e : ca) {
            CKey s = e.first;
            s.ctx = 0;
            per[s]++;
        }
        if (per.empty()) return 0.0;
        return (double)ca.size() / (double)per.size();
    }
};
