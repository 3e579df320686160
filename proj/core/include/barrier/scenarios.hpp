#pragma once

#include "barrier/certify.hpp"
#include "barrier/compat.hpp"
#include "barrier/field.hpp"
#include "barrier/grid.hpp"
#include "barrier/synth.hpp"
#include "barrier/system.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace barrier {

struct SimulateSpec {
    std::vector<double> x0;
    double T = 10.0;
    double dt = 1e-3;
    std::string controller = "controller";
};

struct ReachSpec {
    Grid grid;
    std::vector<double> horizons;
    double dt = 1e-2;
    double sigma_cells = 2.0;
    std::string controller = "controller";
};

struct CompatSpec {
    Grid grid;
    CompatOptions options;
    double origin_cells = 2.0;
};

/// A system with its candidate functions, controllers, numerical settings and
/// expected outcomes. Built-ins and user configs share the same JSON schema.
struct Scenario {
    std::string name;
    std::string description;
    std::shared_ptr<ControlSystem> system;
    std::map<std::string, std::shared_ptr<const ScalarField>> fields;
    KappaFunction alpha = KappaFunction::linear(1.0);
    std::optional<KappaKappaFunction> alpha2;
    std::map<std::string, ControllerPtr> controllers;
    CertificationConfig certify;
    std::map<std::string, InputPolicy> field_policies;
    std::optional<SimulateSpec> simulate;
    std::optional<ReachSpec> reach;
    std::optional<CompatSpec> compat;
    /// Flattened expectations, e.g. "certify_cbf.h" -> "Refuted".
    std::map<std::string, std::string> expected;

    const ScalarField& field(const std::string& key) const;
    FieldPtr field_ptr(const std::string& key) const;
    bool has_field(const std::string& key) const { return fields.count(key) != 0; }
    ControllerPtr controller(const std::string& key) const;
    /// Policy used to certify `field` (field_policies entry or certify.policy).
    InputPolicy policy_for(const std::string& field) const;
    ClfSpec clf() const;
};

namespace scenarios {

std::vector<std::string> list();
/// Throws UnknownScenario.
std::shared_ptr<const Scenario> get(const std::string& name);
std::string source(const std::string& name);

std::shared_ptr<const Scenario> parse(const std::string& json_text);
std::shared_ptr<const Scenario> load(const std::string& path);

/// {u : ((u-1)^2 - (x-1)) ((u+1)^2 + (x-2)) <= 0} as closed intervals, lowest first.
std::vector<std::pair<double, double>> feasible_input_intervals(double x);

/// Points a_k in ((2k+1)pi - pi/4, (2k+1)pi) with e^a sin a = level.
std::vector<Extended> exp_sin_sequence(int k_first, int k_last, double level);

} // namespace scenarios
} // namespace barrier
