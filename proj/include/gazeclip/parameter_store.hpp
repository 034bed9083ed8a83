#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "gazeclip/tensor.hpp"

namespace gazeclip {

using Rng = std::mt19937_64;

struct ParameterEntry {
    std::string name;
    ag::Tensor tensor;
    bool frozen = false;
};

/// Named parameters in insertion order. Frozen entries are created without
/// requires_grad, so no gradient is ever accumulated for them and the
/// optimizer skips them.
class ParameterStore {
public:
    ag::Tensor add(const std::string& name, ag::Tensor tensor, bool frozen);
    ag::Tensor normal(const std::string& name, ag::Shape shape, double stddev, Rng& rng, bool frozen);
    ag::Tensor zeros(const std::string& name, ag::Shape shape, bool frozen);
    ag::Tensor full(const std::string& name, ag::Shape shape, double value, bool frozen);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const ParameterEntry& entry(const std::string& name) const;
    ParameterEntry& entry(const std::string& name);
    const std::vector<ParameterEntry>& entries() const { return entries_; }
    std::vector<ParameterEntry>& entries() { return entries_; }
    std::size_t size() const { return entries_.size(); }

    /// Scalar counts (sum of numel).
    std::size_t trainable_scalars() const;
    std::size_t frozen_scalars() const;
    std::size_t scalars_with_prefix(const std::string& prefix) const;

    void zero_grad();

private:
    std::vector<ParameterEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace gazeclip
