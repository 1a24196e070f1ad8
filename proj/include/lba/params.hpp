#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lba/tensor.hpp"

namespace lba {

// Named, ordered collection of learnable tensors with matching gradient
// buffers. Insertion order is the serialization order.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
    };

    Tensor& add(const std::string& name, Tensor value) {
        require(index_.find(name) == index_.end(), strprintf("ParamStore: duplicate name '%s'", name.c_str()));
        index_[name] = entries_.size();
        entries_.push_back({name, std::move(value), Tensor()});
        Entry& e = entries_.back();
        e.grad = Tensor(e.value.shape());
        return e.value;
    }

    bool contains(const std::string& name) const { return index_.find(name) != index_.end(); }

    const Tensor& value(const std::string& name) const { return entry(name).value; }
    Tensor& value(const std::string& name) { return entries_[find(name)].value; }
    Tensor& grad(const std::string& name) { return entries_[find(name)].grad; }

    const Entry& entry(const std::string& name) const { return entries_[find(name)]; }

    std::size_t size() const { return entries_.size(); }
    const Entry& at(std::size_t i) const { return entries_[i]; }
    Entry& at(std::size_t i) { return entries_[i]; }

    i64 scalar_count() const {
        i64 total = 0;
        for (const Entry& e : entries_) total += e.value.numel();
        return total;
    }

    void zero_grads() {
        for (Entry& e : entries_)
            std::fill(e.grad.vec().begin(), e.grad.vec().end(), 0.0);
    }

private:
    std::size_t find(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), strprintf("ParamStore: unknown name '%s'", name.c_str()));
        return it->second;
    }

    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace lba
