#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "lab/config.hpp"

namespace kpzlab {

inline constexpr int kSchemaVersion = 1;

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row);
    std::size_t column(const std::string& name) const;
};

/// Scientific notation with 17 significant digits; non-finite values are
/// written as nan / inf / -inf.
std::string format_double(double v);

/// One header comment line, then the column names, then the rows.
void write_csv(std::ostream& os, const Table& t, const std::string& command);

/// A single document holding every table. Non-finite numbers become null.
void write_json(std::ostream& os, const std::vector<Table>& tables, const ExperimentConfig& cfg);

/// Writes the tables to cfg.out (stdout when empty). With CSV the first table
/// goes to cfg.out and table k > 0 to "<stem>.<name><ext>".
void emit(const std::vector<Table>& tables, const ExperimentConfig& cfg);

/// Paths emit() writes to, in table order (CSV) or a single path (JSON).
std::vector<std::string> output_paths(const std::vector<Table>& tables, const ExperimentConfig& cfg);

}  // namespace kpzlab
