#pragma once

#include "barrier/certify.hpp"
#include "barrier/compat.hpp"
#include "barrier/domain.hpp"
#include "barrier/reach.hpp"
#include "barrier/synth.hpp"

#include <string>
#include <vector>

namespace barrier::report {

/// Number formatting used in every artefact: 17 significant digits, and
/// JSON null for non-finite values.
std::string number(double v);

std::string csv_escape(const std::string& s);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::string& path, const std::string& content);

std::string margins_csv(const std::vector<MarginRow>& rows, const std::vector<std::string>& state_vars);
std::string trace_csv(const SimulationResult& r, const std::vector<std::string>& state_vars,
                      const std::vector<std::string>& input_vars);
std::string value_field_csv(const ValueField& v, const SmoothedField* psi,
                            const std::vector<std::string>& state_vars);

} // namespace barrier::report
