#include "ksddpg/replay.hpp"

#include <algorithm>

#include "ksddpg/errors.hpp"

namespace ksddpg {

namespace {
Matrix concat_all(const std::vector<Matrix>& parts) {
    std::vector<const Matrix*> refs;
    refs.reserve(parts.size());
    for (const Matrix& m : parts) refs.push_back(&m);
    return concat_rows(refs);
}
} // namespace

Matrix Transition::global_state() const { return concat_all(obs); }
Matrix Transition::global_state_next() const { return concat_all(obs_next); }

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (slots_.size() < capacity_) {
        slots_.push_back(std::move(t));
    } else {
        slots_[start_] = std::move(t);
        start_ = (start_ + 1) % capacity_;
    }
    ++inserted_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= slots_.size()) throw UsageError("replay buffer: index out of range");
    return slots_[(start_ + i) % slots_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
    if (batch == 0 || batch > slots_.size()) {
        throw UsageError("replay buffer: batch larger than stored transitions");
    }
    // Rejection sampling keeps it O(batch) for batch << size; the minibatch
    // never repeats an index.
    std::vector<std::size_t> out;
    out.reserve(batch);
    std::vector<char> taken(slots_.size(), 0);
    while (out.size() < batch) {
        const std::size_t i =
            std::uniform_int_distribution<std::size_t>(0, slots_.size() - 1)(rng);
        if (!taken[i]) {
            taken[i] = 1;
            out.push_back(i);
        }
    }
    return out;
}

} // namespace ksddpg
