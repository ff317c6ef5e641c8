#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "frd/agent.hpp"
#include "frd/cartpole.hpp"
#include "frd/mlp.hpp"

namespace frd {

/// Flat cell index: i0*S^3 + i1*S^2 + i2*S + i3.
using ClusterId = std::uint64_t;

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

/// Even S-per-dimension partition of a 4-d box into S^4 cells. Cells are
/// half-open [a, b) except the last in each dimension, which also contains
/// its upper edge. States outside the box are clamped onto the edge cells.
class ClusterGrid {
public:
    ClusterGrid(int subsections_per_dim, const std::array<Interval, 4>& bounds);

    /// position [-2.4, 2.4], velocity [-3, 3], angle [-0.2095, 0.2095], angular velocity [-3.5, 3.5]
    static std::array<Interval, 4> cartpole_bounds();
    static ClusterGrid cartpole(int subsections_per_dim) { return {subsections_per_dim, cartpole_bounds()}; }

    int subsections() const { return subsections_; }
    std::uint64_t cluster_count() const;
    const std::array<Interval, 4>& bounds() const { return bounds_; }

    std::array<int, 4> cell_indices(const EnvState& state) const;
    ClusterId cluster_of(const EnvState& state) const;

    ClusterId encode(const std::array<int, 4>& indices) const;
    /// Throws std::out_of_range for id >= S^4.
    std::array<int, 4> decode(ClusterId id) const;

    /// [a, b) for subsection `index` of dimension `dim`.
    Interval cell_interval(int dim, int index) const;
    /// Midpoint of the cell in every dimension.
    EnvState proxy_state(ClusterId id) const;

private:
    int subsections_;
    std::array<Interval, 4> bounds_;
    std::array<double, 4> widths_{};
};

struct ProxyRecord {
    ClusterId cluster = 0;
    PolicyVector mean{0.5, 0.5};
    std::int64_t visits = 0;
    bool operator==(const ProxyRecord&) const = default;
};

struct ValueRecord {
    ClusterId cluster = 0;
    double mean = 0.0;
    std::int64_t visits = 0;
    bool operator==(const ValueRecord&) const = default;
};

/// Throws std::invalid_argument unless components are >= 0 and sum to 1 within `tolerance`.
void validate_policy(const PolicyVector& p, double tolerance = 1e-6);

/// Per-cluster running policy sums of one agent.
class LocalProxyMemory final : public VisitRecorder {
public:
    explicit LocalProxyMemory(const ClusterGrid& grid) : grid_(grid) {}

    void record_policy(const EnvState& state, const PolicyVector& policy);
    void record(const EnvState& state, const PolicyVector& policy, double) override { record_policy(state, policy); }

    /// Per-cluster means sorted by cluster id; empties the memory.
    std::vector<ProxyRecord> finalize_local();
    /// Same output as finalize_local() without clearing.
    std::vector<ProxyRecord> snapshot() const;

    std::size_t size() const { return entries_.size(); }
    std::int64_t total_visits() const { return total_visits_; }
    const ClusterGrid& grid() const { return grid_; }
    void clear();

private:
    struct Entry {
        PolicyVector sum{0.0, 0.0};
        std::int64_t visits = 0;
    };
    ClusterGrid grid_;
    std::unordered_map<ClusterId, Entry> entries_;
    std::int64_t total_visits_ = 0;
};

/// Per-cluster running value sums of one agent.
class LocalValueMemory final : public VisitRecorder {
public:
    explicit LocalValueMemory(const ClusterGrid& grid) : grid_(grid) {}

    /// Throws std::invalid_argument on a non-finite value.
    void record_value(const EnvState& state, double value);
    void record(const EnvState& state, const PolicyVector&, double value) override { record_value(state, value); }
    bool wants_value() const override { return true; }

    std::vector<ValueRecord> finalize_value();
    std::vector<ValueRecord> snapshot() const;

    std::size_t size() const { return entries_.size(); }
    std::int64_t total_visits() const { return total_visits_; }
    const ClusterGrid& grid() const { return grid_; }
    void clear();

private:
    struct Entry {
        double sum = 0.0;
        std::int64_t visits = 0;
    };
    ClusterGrid grid_;
    std::unordered_map<ClusterId, Entry> entries_;
    std::int64_t total_visits_ = 0;
};

struct Experience {
    EnvState state;
    PolicyVector policy;
};

/// Raw (state, policy) list, the non-private baseline memory.
class ExperienceMemory final : public VisitRecorder {
public:
    void record(const EnvState& state, const PolicyVector& policy, double) override;
    void append(const ExperienceMemory& other);
    void clear() { entries_.clear(); }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<Experience>& entries() const { return entries_; }

private:
    std::vector<Experience> entries_;
};

}  // namespace frd
