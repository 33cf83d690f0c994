#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace collar {

enum class ErrorKind {
    domain,
    resolution,
    config,
    parse,
    model,
    splice,
    regime,
    geometry,
    range,
    step,
    solve,
    source,
    shape,
    hypothesis,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::domain: return "domain-error";
    case ErrorKind::resolution: return "resolution-error";
    case ErrorKind::config: return "config-error";
    case ErrorKind::parse: return "parse-error";
    case ErrorKind::model: return "model-error";
    case ErrorKind::splice: return "splice-error";
    case ErrorKind::regime: return "regime-error";
    case ErrorKind::geometry: return "geometry-error";
    case ErrorKind::range: return "range-error";
    case ErrorKind::step: return "step-error";
    case ErrorKind::solve: return "solve-error";
    case ErrorKind::source: return "source-error";
    case ErrorKind::shape: return "shape-error";
    case ErrorKind::hypothesis: return "hypothesis-error";
    }
    return "error";
}

/// Single exception type for the library; the kind selects the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Newton failure inside one implicit step; carries the last scaled residual.
class StepError : public Error {
public:
    StepError(const std::string& what, double residual)
        : Error(ErrorKind::step, what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

} // namespace collar
