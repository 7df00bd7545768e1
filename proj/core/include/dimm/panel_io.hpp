#pragma once

#include "dimm/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dimm {

/// Loaded panel plus the labels found in the files.
struct LoadedPanel {
  PanelDataset data;
  std::vector<std::string> subject_ids;
  std::vector<std::string> response_names;
  std::vector<std::string> covariate_names;
};

/// Reads a wide response file (header row, one row per subject, M numeric
/// columns, optionally led by a `subject_id` column) and a long covariate file
/// (`subject_id`, `position` in 1..M, then p covariate columns, N*M rows in
/// any order). Without a subject_id column in the response file, subjects are
/// keyed 1..N by row. Delimiter is comma, or tab when the header has no comma.
LoadedPanel load_panel(const std::filesystem::path& response_path, const std::filesystem::path& covariate_path);

/// Writes the two files read by load_panel. Subjects are keyed 1..N.
void save_panel(const PanelDataset& data, const std::filesystem::path& response_path,
                const std::filesystem::path& covariate_path, const std::vector<std::string>& covariate_names = {});

/// Prepends a column of ones to every subject's covariate matrix.
PanelDataset with_intercept(const PanelDataset& data);

}  // namespace dimm
