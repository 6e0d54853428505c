#pragma once

#include <iosfwd>
#include <string>

#include "settings.hpp"

namespace oinn::cli {

// Each command writes its artifacts under the settings' out_dir, prints a
// one-line result to `out` and returns the process exit code.
int cmd_list(std::ostream& out);
int cmd_train(const TrainSettings& s, const std::string& argv, std::ostream& out);
int cmd_integrate(const IntegrateSettings& s, const std::string& argv, std::ostream& out);
int cmd_compare(const CompareSettings& s, const std::string& argv, std::ostream& out);
int cmd_sweep(const SweepSettings& s, const std::string& argv, std::ostream& out);

}  // namespace oinn::cli
