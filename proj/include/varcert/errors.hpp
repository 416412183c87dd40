#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace varcert {

/// Malformed or unreadable input data (files, streams).
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid run configuration. Carries the offending key so the CLI can name it.
class config_error : public std::runtime_error {
public:
    config_error(const std::string& key, const std::string& what)
        : std::runtime_error(what), key_(key) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// A dual-pair input (v, eta) violates the pointwise feasibility conditions.
/// Carries the offending node indices rather than silently emptying sets.
class infeasible_error : public std::runtime_error {
public:
    infeasible_error(std::string what, std::vector<std::size_t> nodes)
        : std::runtime_error(std::move(what)), nodes_(std::move(nodes)) {}
    const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }

private:
    std::vector<std::size_t> nodes_;
};

/// A numerical routine failed to meet its contract (solver breakdown,
/// non-finite values, residual check failure).
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace varcert
