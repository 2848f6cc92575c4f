#include "copycat/economics.hpp"

#include <fstream>

#include <json.hpp>

namespace copycat {

void validate_cost_model(const CostModel& model) {
  if (model.price_per_batch < Rational(0)) throw ValidationError("price_per_batch must be >= 0");
  if (model.labeling_cost < Rational(0)) throw ValidationError("labeling_cost must be >= 0");
  if (model.odd_size < 0) throw ValidationError("odd_size must be >= 0");
  if (model.npdd_size < 1) throw ValidationError("npdd_size must be >= 1");
}

Rational attack_cost(int64_t num_queries, const Rational& price_per_batch) {
  if (num_queries < 0) throw ValidationError("num_queries must be >= 0");
  if (price_per_batch < Rational(0)) throw ValidationError("price_per_batch must be >= 0");
  return Rational(num_queries) * price_per_batch / Rational(1000);
}

Rational minimum_batch_price(const Rational& labeling_cost, int64_t npdd_size) {
  if (labeling_cost < Rational(0)) throw ValidationError("labeling_cost must be >= 0");
  if (npdd_size < 1000) throw ValidationError("npdd_size must be >= 1000");
  return labeling_cost / (Rational(npdd_size) / Rational(1000));
}

ViabilityReport viability_report(const CostModel& model) {
  validate_cost_model(model);
  ViabilityReport r;
  r.attack_cost = attack_cost(model.npdd_size, model.price_per_batch);
  r.labeling_cost = model.labeling_cost;
  r.break_even_price = minimum_batch_price(model.labeling_cost, model.npdd_size);
  r.viable = r.attack_cost < r.labeling_cost;
  return r;
}

void write_viability_json(const std::string& path, const CostModel& model,
                          const ViabilityReport& report) {
  nlohmann::json j{{"price_per_batch", model.price_per_batch.to_decimal_string()},
                   {"odd_size", model.odd_size},
                   {"npdd_size", model.npdd_size},
                   {"attack_cost", report.attack_cost.to_decimal_string()},
                   {"labeling_cost", report.labeling_cost.to_decimal_string()},
                   {"break_even_price", report.break_even_price.to_decimal_string()},
                   {"viable", report.viable}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path);
}

void write_cost_csv(const std::string& path, const std::vector<CostTableRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "problem,odd_size,labeling_cost,npdd_size,minimum_batch_price\n";
  for (const auto& row : rows) {
    const Rational price = minimum_batch_price(row.labeling_cost, row.npdd_size);
    os << row.problem << "," << row.odd_size << "," << row.labeling_cost.to_decimal_string()
       << "," << row.npdd_size << "," << price.to_decimal_string() << "\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace copycat
