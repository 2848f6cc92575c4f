#include "copycat/common.hpp"

namespace copycat {

MissingClassError::MissingClassError(std::vector<int> missing)
    : ValidationError([&missing] {
        std::string msg = "no samples for class(es):";
        for (const int c : missing) msg += " " + std::to_string(c);
        return msg;
      }()),
      missing_(std::move(missing)) {}

PoolExhaustedError::PoolExhaustedError(int class_index, const std::string& what)
    : std::runtime_error(what), class_index_(class_index) {}

}  // namespace copycat
