#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace modeshare {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required column or field is missing from an input file.
class SchemaError : public Error {
public:
    SchemaError(std::string column, const std::string& what)
        : Error(what), column_(std::move(column)) {}
    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

/// A data row could not be parsed or violates a value constraint.
class RowError : public Error {
public:
    RowError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class RangeError : public Error {
public:
    using Error::Error;
};

/// No population cell centroid fell inside the boundary.
class EmptyCoverageError : public Error {
public:
    using Error::Error;
};

/// Metadata client could not reach its backend. Safe to retry.
class TransportError : public Error {
public:
    TransportError(std::string point_id, const std::string& what)
        : Error("point " + point_id + ": " + what), point_id_(std::move(point_id)) {}
    const std::string& point_id() const noexcept { return point_id_; }
    bool retryable() const noexcept { return true; }

private:
    std::string point_id_;
};

/// Cross-file inconsistency, e.g. a detection for an image not in the manifest.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// Mean numerically saturated at 0 or 1 on a given design row.
class NumericError : public Error {
public:
    NumericError(std::size_t row, const std::string& what)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class RankDeficiencyError : public Error {
public:
    RankDeficiencyError(std::vector<std::string> columns, const std::string& what)
        : Error(what), columns_(std::move(columns)) {}
    const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
    std::vector<std::string> columns_;
};

/// Invalid configuration; carries the dotted field name.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace modeshare
