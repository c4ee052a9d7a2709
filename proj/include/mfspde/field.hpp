#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfspde {

/// Monte-Carlo ensemble of spatial fields at one time level, stored
/// scenario-major: values[s * n_nodes + i].
class FieldEnsemble {
public:
    FieldEnsemble() = default;
    FieldEnsemble(std::size_t n_scenarios, std::size_t n_nodes, double fill = 0.0)
        : n_scenarios_(n_scenarios), n_nodes_(n_nodes), values_(n_scenarios * n_nodes, fill) {}

    std::size_t n_scenarios() const noexcept { return n_scenarios_; }
    std::size_t n_nodes() const noexcept { return n_nodes_; }

    double& operator()(std::size_t s, std::size_t i) { return values_[s * n_nodes_ + i]; }
    double operator()(std::size_t s, std::size_t i) const { return values_[s * n_nodes_ + i]; }

    std::span<double> scenario(std::size_t s) { return {values_.data() + s * n_nodes_, n_nodes_}; }
    std::span<const double> scenario(std::size_t s) const {
        return {values_.data() + s * n_nodes_, n_nodes_};
    }

    /// Copies the samples of node i across scenarios.
    std::vector<double> node_samples(std::size_t i) const {
        std::vector<double> out(n_scenarios_);
        for (std::size_t s = 0; s < n_scenarios_; ++s) out[s] = values_[s * n_nodes_ + i];
        return out;
    }

    void set_node_samples(std::size_t i, std::span<const double> samples) {
        for (std::size_t s = 0; s < n_scenarios_; ++s) values_[s * n_nodes_ + i] = samples[s];
    }

    /// Arithmetic mean over scenarios at node i, summed in scenario order.
    double node_mean(std::size_t i) const {
        double acc = 0.0;
        for (std::size_t s = 0; s < n_scenarios_; ++s) acc += values_[s * n_nodes_ + i];
        return acc / static_cast<double>(n_scenarios_);
    }

    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    bool operator==(const FieldEnsemble&) const = default;

private:
    std::size_t n_scenarios_ = 0;
    std::size_t n_nodes_ = 0;
    std::vector<double> values_;
};

}  // namespace mfspde
