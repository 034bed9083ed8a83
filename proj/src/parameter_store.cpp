#include "gazeclip/parameter_store.hpp"

#include "gazeclip/errors.hpp"

namespace gazeclip {

ag::Tensor ParameterStore::add(const std::string& name, ag::Tensor tensor, bool frozen) {
    require(!name.empty(), ErrorKind::kContract, "parameter name must be nonempty");
    require(!contains(name), ErrorKind::kContract, "duplicate parameter name '" + name + "'");
    tensor.set_requires_grad(!frozen);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, tensor, frozen});
    return tensor;
}

ag::Tensor ParameterStore::normal(const std::string& name, ag::Shape shape, double stddev, Rng& rng,
                                  bool frozen) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> values(ag::shape_numel(shape));
    for (auto& v : values) v = ag::quantize(dist(rng));
    return add(name, ag::Tensor::from_values(std::move(shape), std::move(values)), frozen);
}

ag::Tensor ParameterStore::zeros(const std::string& name, ag::Shape shape, bool frozen) {
    return add(name, ag::Tensor::zeros(std::move(shape)), frozen);
}

ag::Tensor ParameterStore::full(const std::string& name, ag::Shape shape, double value, bool frozen) {
    return add(name, ag::Tensor::full(std::move(shape), ag::quantize(value)), frozen);
}

const ParameterEntry& ParameterStore::entry(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::kContract, "unknown parameter '" + name + "'");
    return entries_[it->second];
}

ParameterEntry& ParameterStore::entry(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::kContract, "unknown parameter '" + name + "'");
    return entries_[it->second];
}

std::size_t ParameterStore::trainable_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
        if (!e.frozen) n += e.tensor.numel();
    return n;
}

std::size_t ParameterStore::frozen_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
        if (e.frozen) n += e.tensor.numel();
    return n;
}

std::size_t ParameterStore::scalars_with_prefix(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& e : entries_)
        if (e.name.compare(0, prefix.size(), prefix) == 0) n += e.tensor.numel();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

}  // namespace gazeclip
