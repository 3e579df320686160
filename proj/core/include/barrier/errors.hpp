#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace barrier {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression text; `offset` is the byte position of the offending token.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string& message, std::size_t offset)
        : Error(message + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class UnknownVariable : public Error {
public:
    explicit UnknownVariable(std::string name)
        : Error("unknown variable '" + name + "'"), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

/// Evaluation left the domain of a primitive (sqrt/log of a negative, x/0, ...).
class DomainError : public Error {
public:
    DomainError(const std::string& message, std::string subexpression)
        : Error(message + " in '" + subexpression + "'"), subexpression_(std::move(subexpression)) {}
    const std::string& subexpression() const { return subexpression_; }

private:
    std::string subexpression_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NotAffine : public Error {
public:
    NotAffine() : Error("operation requires a control-affine split a(x) + g(x)u") {}
};

/// A sample at r = 0 that no class-K majorant can dominate.
class InfeasibleMajorant : public Error {
public:
    InfeasibleMajorant(double r, double c, double v)
        : Error("no extended class-K majorant: sample at r=0 has value " + std::to_string(v)),
          r_(r), c_(c), v_(v) {}
    double r() const { return r_; }
    double c() const { return c_; }
    double value() const { return v_; }

private:
    double r_, c_, v_;
};

class NotCompact : public Error {
public:
    NotCompact() : Error("safe set touches the working box boundary; compactness not established") {}
};

class EmptyBand : public Error {
public:
    explicit EmptyBand(double r) : Error("no lattice point in the band 0 <= h <= " + std::to_string(r)), r_(r) {}
    double r() const { return r_; }

private:
    double r_;
};

class EmptyRegion : public Error {
public:
    EmptyRegion() : Error("no lattice point of the safe set inside the scan grid") {}
};

class BandViolation : public Error {
public:
    BandViolation(std::size_t index, double value)
        : Error("point " + std::to_string(index) + " has h=" + std::to_string(value) + " outside the band"),
          index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

class BandwidthExhausted : public Error {
public:
    explicit BandwidthExhausted(std::vector<std::size_t> points)
        : Error("smoothing bound violated at " + std::to_string(points.size()) + " points after bandwidth halving"),
          points_(std::move(points)) {}
    const std::vector<std::size_t>& points() const { return points_; }

private:
    std::vector<std::size_t> points_;
};

class StageFailure : public Error {
public:
    StageFailure(int stage, std::string evidence)
        : Error("construction failed at stage " + std::to_string(stage) + ": " + evidence),
          stage_(stage), evidence_(std::move(evidence)) {}
    int stage() const { return stage_; }
    const std::string& evidence() const { return evidence_; }

private:
    int stage_;
    std::string evidence_;
};

class ArgminNotOrigin : public Error {
public:
    ArgminNotOrigin(std::vector<double> argmin)
        : Error("grid minimiser of the CLBF is not at the origin"), argmin_(std::move(argmin)) {}
    const std::vector<double>& argmin() const { return argmin_; }

private:
    std::vector<double> argmin_;
};

class HypothesisFailed : public Error {
public:
    HypothesisFailed(std::vector<double> point, std::string why)
        : Error("collinearity hypothesis fails: " + why), point_(std::move(point)) {}
    const std::vector<double>& point() const { return point_; }

private:
    std::vector<double> point_;
};

class ControllerInfeasible : public Error {
public:
    using Error::Error;
};

class UnknownScenario : public Error {
public:
    explicit UnknownScenario(const std::string& name) : Error("unknown scenario '" + name + "'") {}
};

class MalformedResult : public Error {
public:
    using Error::Error;
};

} // namespace barrier
