#pragma once

#include <cstdint>
#include <vector>

#include "ksddpg/matrix.hpp"
#include "ksddpg/rng.hpp"

namespace ksddpg {

/// One joint experience tuple (x, x', a, Phi, r): per-agent observations
/// before and after, executed action vectors and indices, per-agent knowledge
/// snapshots (empty for algorithms without a container), and rewards.
struct Transition {
    std::vector<Matrix> obs;
    std::vector<Matrix> obs_next;
    std::vector<Matrix> action_vec;
    std::vector<int> action_index;
    std::vector<Matrix> knowledge;
    std::vector<double> reward;
    bool done = false;

    Matrix global_state() const;
    Matrix global_state_next() const;
};

/// Fixed-capacity ring with FIFO eviction and uniform sampling without
/// replacement inside a minibatch.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return slots_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t inserted() const { return inserted_; }

    /// i-th oldest transition, i in [0, size).
    const Transition& at(std::size_t i) const;

    std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

private:
    std::size_t capacity_;
    std::vector<Transition> slots_;
    std::size_t start_ = 0;
    std::uint64_t inserted_ = 0;
};

} // namespace ksddpg
