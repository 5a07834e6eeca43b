#pragma once

#include <string>
#include <vector>

#include "hetmed/types.hpp"

namespace hetmed {

struct ColumnMapping {
  std::string y;
  std::string a;
  std::string m;
  std::vector<std::string> covariates;  // names of non-intercept covariate columns
};

struct IngestReport {
  Eigen::Index n_rows = 0;
  Eigen::Index n_blank_skipped = 0;
};

// Reads a UTF-8, comma-separated file with a header row into a Dataset with a
// prepended constant column. Blank lines are skipped and counted; a missing
// column, a non-numeric cell or an empty cell is a hard error naming the
// offending column/row.
Dataset ingest_csv(const std::string& path, const ColumnMapping& mapping,
                   IngestReport* report = nullptr);

// Writes (y, a, m, covariates) with round-trippable precision; the intercept
// column is not written.
void write_dataset_csv(const std::string& path, const Dataset& data,
                       const ColumnMapping& mapping);

}  // namespace hetmed
