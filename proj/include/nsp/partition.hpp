#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsp {

// Partition of point indices {0..N-1} into a (possibly empty) background set
// plus disjoint non-empty clusters. Canonical form sorts each block and
// orders clusters by their minimum member, so equality is label-invariant.
struct Partition {
    std::vector<std::vector<int>> clusters;
    std::vector<int> background;
    int n_total = 0;

    int num_clusters() const { return static_cast<int>(clusters.size()); }

    void canonicalize() {
        for (auto& c : clusters) std::sort(c.begin(), c.end());
        std::sort(background.begin(), background.end());
        std::sort(clusters.begin(), clusters.end(),
                  [](const auto& a, const auto& b) { return a.front() < b.front(); });
    }

    void validate() const {
        std::vector<char> seen(static_cast<std::size_t>(n_total), 0);
        auto mark = [&](int i) {
            if (i < 0 || i >= n_total) throw std::invalid_argument("Partition: index out of range");
            if (seen[static_cast<std::size_t>(i)]) throw std::invalid_argument("Partition: duplicate index");
            seen[static_cast<std::size_t>(i)] = 1;
        };
        for (int i : background) mark(i);
        for (const auto& c : clusters) {
            if (c.empty()) throw std::invalid_argument("Partition: empty cluster");
            for (int i : c) mark(i);
        }
        for (char s : seen)
            if (!s) throw std::invalid_argument("Partition: missing index");
    }

    // Label vector: 0 = background, clusters numbered 1..K by minimum member.
    std::vector<int> to_labels() const {
        Partition p = *this;
        p.canonicalize();
        std::vector<int> z(static_cast<std::size_t>(n_total), 0);
        for (int k = 0; k < p.num_clusters(); ++k)
            for (int i : p.clusters[static_cast<std::size_t>(k)])
                z[static_cast<std::size_t>(i)] = k + 1;
        return z;
    }

    static Partition from_labels(std::span<const int> z) {
        Partition p;
        p.n_total = static_cast<int>(z.size());
        int max_label = 0;
        for (int l : z) {
            if (l < 0) throw std::invalid_argument("labels must be >= 0");
            max_label = std::max(max_label, l);
        }
        std::vector<std::vector<int>> blocks(static_cast<std::size_t>(max_label));
        for (int i = 0; i < p.n_total; ++i) {
            int l = z[static_cast<std::size_t>(i)];
            if (l == 0)
                p.background.push_back(i);
            else
                blocks[static_cast<std::size_t>(l - 1)].push_back(i);
        }
        for (auto& b : blocks) {
            if (b.empty()) throw std::invalid_argument("labels must be contiguous 1..K");
            p.clusters.push_back(std::move(b));
        }
        p.canonicalize();
        return p;
    }

    // Multiset of cluster sizes, descending.
    std::vector<int> size_multiset() const {
        std::vector<int> s;
        s.reserve(clusters.size());
        for (const auto& c : clusters) s.push_back(static_cast<int>(c.size()));
        std::sort(s.begin(), s.end(), std::greater<int>());
        return s;
    }

    bool operator==(const Partition& other) const {
        Partition a = *this, b = other;
        a.canonicalize();
        b.canonicalize();
        return a.n_total == b.n_total && a.background == b.background && a.clusters == b.clusters;
    }

    std::string canonical_key() const {
        Partition p = *this;
        p.canonicalize();
        std::string key = "b:";
        for (int i : p.background) key += std::to_string(i) + ",";
        for (const auto& c : p.clusters) {
            key += "|";
            for (int i : c) key += std::to_string(i) + ",";
        }
        return key;
    }
};

inline constexpr int kMaxEnumerationSize = 10;

// All set partitions of {0..n-1}, via restricted growth strings.
inline std::vector<Partition> enumerate_partitions(int n) {
    if (n < 1) throw std::invalid_argument("enumerate_partitions: need n >= 1");
    if (n > kMaxEnumerationSize)
        throw std::invalid_argument("enumerate_partitions: n exceeds the Bell-number guard");
    std::vector<Partition> out;
    std::vector<int> rgs(static_cast<std::size_t>(n), 0);
    auto emit = [&]() {
        int k = *std::max_element(rgs.begin(), rgs.end()) + 1;
        Partition p;
        p.n_total = n;
        p.clusters.assign(static_cast<std::size_t>(k), {});
        for (int i = 0; i < n; ++i) p.clusters[static_cast<std::size_t>(rgs[static_cast<std::size_t>(i)])].push_back(i);
        out.push_back(std::move(p));
    };
    // Iterate restricted growth strings in lexicographic order.
    for (;;) {
        emit();
        int i = n - 1;
        while (i > 0) {
            int prefix_max = 0;
            for (int j = 0; j < i; ++j) prefix_max = std::max(prefix_max, rgs[static_cast<std::size_t>(j)]);
            if (rgs[static_cast<std::size_t>(i)] <= prefix_max) break;
            --i;
        }
        if (i == 0) break;
        ++rgs[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < n; ++j) rgs[static_cast<std::size_t>(j)] = 0;
    }
    return out;
}

// All partitions of {0..n-1} extended with a distinguished (possibly empty)
// background block: every subset as background, every partition of the rest.
inline std::vector<Partition> enumerate_partitions_with_background(int n) {
    if (n < 1) throw std::invalid_argument("enumerate_partitions_with_background: need n >= 1");
    if (n > kMaxEnumerationSize - 1)
        throw std::invalid_argument("enumerate_partitions_with_background: n exceeds the Bell-number guard");
    std::vector<Partition> out;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> bg, rest;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i))
                bg.push_back(i);
            else
                rest.push_back(i);
        }
        if (rest.empty()) {
            Partition p;
            p.n_total = n;
            p.background = bg;
            out.push_back(std::move(p));
            continue;
        }
        for (const Partition& q : enumerate_partitions(static_cast<int>(rest.size()))) {
            Partition p;
            p.n_total = n;
            p.background = bg;
            for (const auto& c : q.clusters) {
                std::vector<int> mapped;
                mapped.reserve(c.size());
                for (int i : c) mapped.push_back(rest[static_cast<std::size_t>(i)]);
                p.clusters.push_back(std::move(mapped));
            }
            p.canonicalize();
            out.push_back(std::move(p));
        }
    }
    return out;
}

}  // namespace nsp
