#include "frd/proxy_memory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace frd {

ClusterGrid::ClusterGrid(int subsections_per_dim, const std::array<Interval, 4>& bounds)
    : subsections_(subsections_per_dim), bounds_(bounds) {
    if (subsections_ < 1) throw std::invalid_argument("ClusterGrid: subsections per dimension must be >= 1");
    for (int d = 0; d < 4; ++d) {
        const auto& b = bounds_[d];
        if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi)) {
            throw std::invalid_argument("ClusterGrid: bounds for dimension " + std::to_string(d) +
                                        " must be finite with lo < hi");
        }
        widths_[d] = (b.hi - b.lo) / subsections_;
    }
}

std::array<Interval, 4> ClusterGrid::cartpole_bounds() {
    return {Interval{-2.4, 2.4}, Interval{-3.0, 3.0}, Interval{-0.2095, 0.2095}, Interval{-3.5, 3.5}};
}

std::uint64_t ClusterGrid::cluster_count() const {
    const auto s = static_cast<std::uint64_t>(subsections_);
    return s * s * s * s;
}

std::array<int, 4> ClusterGrid::cell_indices(const EnvState& state) const {
    const auto values = state.as_array();
    std::array<int, 4> idx{};
    for (int d = 0; d < 4; ++d) {
        if (!std::isfinite(values[d])) throw std::invalid_argument("cluster_of: non-finite state component");
        const auto& b = bounds_[d];
        const double clamped = std::clamp(values[d], b.lo, std::nextafter(b.hi, b.lo));
        const auto i = static_cast<int>(std::floor((clamped - b.lo) / widths_[d]));
        idx[d] = std::clamp(i, 0, subsections_ - 1);
    }
    return idx;
}

ClusterId ClusterGrid::cluster_of(const EnvState& state) const { return encode(cell_indices(state)); }

ClusterId ClusterGrid::encode(const std::array<int, 4>& indices) const {
    const auto s = static_cast<ClusterId>(subsections_);
    ClusterId id = 0;
    for (int i : indices) {
        if (i < 0 || i >= subsections_) throw std::out_of_range("ClusterGrid::encode: index out of range");
        id = id * s + static_cast<ClusterId>(i);
    }
    return id;
}

std::array<int, 4> ClusterGrid::decode(ClusterId id) const {
    if (id >= cluster_count()) {
        throw std::out_of_range("ClusterGrid: cluster id " + std::to_string(id) + " >= " +
                                std::to_string(cluster_count()));
    }
    const auto s = static_cast<ClusterId>(subsections_);
    std::array<int, 4> idx{};
    for (int d = 3; d >= 0; --d) {
        idx[d] = static_cast<int>(id % s);
        id /= s;
    }
    return idx;
}

Interval ClusterGrid::cell_interval(int dim, int index) const {
    const auto& b = bounds_.at(static_cast<std::size_t>(dim));
    const double lo = b.lo + index * widths_[dim];
    const double hi = index + 1 == subsections_ ? b.hi : b.lo + (index + 1) * widths_[dim];
    return {lo, hi};
}

EnvState ClusterGrid::proxy_state(ClusterId id) const {
    const auto idx = decode(id);
    std::array<double, 4> mid{};
    for (int d = 0; d < 4; ++d) {
        const auto cell = cell_interval(d, idx[d]);
        mid[d] = 0.5 * (cell.lo + cell.hi);
    }
    return EnvState::from_array(mid);
}

void validate_policy(const PolicyVector& p, double tolerance) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || p[0] < 0.0 || p[1] < 0.0 ||
        std::abs(p[0] + p[1] - 1.0) > tolerance) {
        throw std::invalid_argument("invalid policy vector (" + std::to_string(p[0]) + ", " + std::to_string(p[1]) +
                                    ")");
    }
}

void LocalProxyMemory::record_policy(const EnvState& state, const PolicyVector& policy) {
    validate_policy(policy);
    auto& e = entries_[grid_.cluster_of(state)];
    e.sum[0] += policy[0];
    e.sum[1] += policy[1];
    ++e.visits;
    ++total_visits_;
}

std::vector<ProxyRecord> LocalProxyMemory::snapshot() const {
    std::vector<ProxyRecord> out;
    out.reserve(entries_.size());
    for (const auto& [id, e] : entries_) {
        const auto n = static_cast<double>(e.visits);
        out.push_back({id, {e.sum[0] / n, e.sum[1] / n}, e.visits});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.cluster < b.cluster; });
    return out;
}

std::vector<ProxyRecord> LocalProxyMemory::finalize_local() {
    auto out = snapshot();
    clear();
    return out;
}

void LocalProxyMemory::clear() {
    entries_.clear();
    total_visits_ = 0;
}

void LocalValueMemory::record_value(const EnvState& state, double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("record_value: non-finite value");
    auto& e = entries_[grid_.cluster_of(state)];
    e.sum += value;
    ++e.visits;
    ++total_visits_;
}

std::vector<ValueRecord> LocalValueMemory::snapshot() const {
    std::vector<ValueRecord> out;
    out.reserve(entries_.size());
    for (const auto& [id, e] : entries_) out.push_back({id, e.sum / static_cast<double>(e.visits), e.visits});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.cluster < b.cluster; });
    return out;
}

std::vector<ValueRecord> LocalValueMemory::finalize_value() {
    auto out = snapshot();
    clear();
    return out;
}

void LocalValueMemory::clear() {
    entries_.clear();
    total_visits_ = 0;
}

void ExperienceMemory::record(const EnvState& state, const PolicyVector& policy, double) {
    validate_policy(policy);
    entries_.push_back({state, policy});
}

void ExperienceMemory::append(const ExperienceMemory& other) {
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

}  // namespace frd
