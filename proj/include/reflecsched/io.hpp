#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "reflecsched/model.hpp"

namespace reflecsched {

// Raised for instance or schedule files that do not match the schema.
// `location` is a JSON pointer (or CSV line) naming the offending field.
class FormatError : public std::runtime_error {
public:
    FormatError(std::string location, const std::string& message)
        : std::runtime_error(location + ": " + message), location_(std::move(location)) {}

    const std::string& location() const { return location_; }

private:
    std::string location_;
};

nlohmann::json instance_to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& doc);

// Sorted keys, integer micro-unit times, no whitespace.
std::string canonical_json(const Instance& instance);

Instance parse_instance(const std::string& text);
Instance read_instance(const std::filesystem::path& path);
void write_instance(const Instance& instance, const std::filesystem::path& path);

// Columns: job_id,op_index,machine_id,start,end,interruptions. Interruptions
// are `begin-end` pairs joined by ';'.
std::string schedule_to_csv(const ScheduleRecord& schedule, const Instance& instance);
ScheduleRecord schedule_from_csv(const std::string& text, const Instance& instance);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace reflecsched
