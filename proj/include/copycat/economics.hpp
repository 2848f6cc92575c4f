#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "copycat/rational.hpp"

namespace copycat {

// price_per_batch is per 1000 queries; npdd_size is the query count a
// successful copy needs; labeling_cost is what annotating the ODD would cost.
struct CostModel {
  Rational price_per_batch;
  Rational labeling_cost;
  int64_t odd_size = 0;
  int64_t npdd_size = 1;
};

void validate_cost_model(const CostModel& model);

// num_queries * price_per_batch / 1000, exact.
Rational attack_cost(int64_t num_queries, const Rational& price_per_batch);

// Break-even batch price: labeling_cost / (npdd_size / 1000), exact.
// Requires npdd_size >= 1000.
Rational minimum_batch_price(const Rational& labeling_cost, int64_t npdd_size);

struct ViabilityReport {
  Rational attack_cost;
  Rational labeling_cost;
  Rational break_even_price;
  bool viable = false;  // strict: attack cost < labeling cost
};

ViabilityReport viability_report(const CostModel& model);

void write_viability_json(const std::string& path, const CostModel& model,
                          const ViabilityReport& report);

struct CostTableRow {
  std::string problem;
  int64_t odd_size = 0;
  Rational labeling_cost;
  int64_t npdd_size = 1;
};

// Columns: problem, ODD size, labeling cost, NPDD size, minimum batch price.
void write_cost_csv(const std::string& path, const std::vector<CostTableRow>& rows);

}  // namespace copycat
