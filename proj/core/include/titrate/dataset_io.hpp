#pragma once

// Flat-file exchange of simulated trials.
//
// One row per subject, columns in this order:
//   subject_id,arm,eta_cl,eta_v,d1,d2,d3,d4,e1,e2,e3,e4,s1,s2,s3,adherent
// Reals use '.' and the shortest round-trip representation, flags are 0/1,
// lines end in LF. Dose times are implied by the design.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "titrate/trial.hpp"

namespace titrate {

inline constexpr std::string_view kDatasetHeader =
    "subject_id,arm,eta_cl,eta_v,d1,d2,d3,d4,e1,e2,e3,e4,s1,s2,s3,adherent";

/// Shortest decimal representation that parses back to the same double.
std::string format_real(double x);

void write_dataset_csv(const TrialDataset& ds, std::ostream& out);
void write_dataset_csv(const TrialDataset& ds, const std::filesystem::path& path);

/// Parses a dataset. The scenario and regime are not stored in the file and are
/// attached as given.
TrialDataset read_dataset_csv(std::istream& in, const Scenario& scenario,
                              Regime regime = Regime::kObserved);
TrialDataset read_dataset_csv(const std::filesystem::path& path, const Scenario& scenario,
                              Regime regime = Regime::kObserved);

}  // namespace titrate
