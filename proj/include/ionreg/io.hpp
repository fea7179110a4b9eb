#pragma once

#include "ionreg/schedule.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace ionreg {

inline constexpr const char* schema_version = "ionreg/v1";

std::string read_file(const std::string& path);
// Writes to path + ".tmp" and renames over path, so readers never observe a
// half-written file. Creates parent directories as needed.
void atomic_write_file(const std::string& path, const std::string& content);

// Shortest-exact decimal form of a double (printf %.17g).
std::string fmt_g17(double v);

nlohmann::ordered_json schedule_to_json(const Schedule& s, const std::string& config_hash);
Schedule schedule_from_json(const nlohmann::json& j);
Schedule load_schedule_file(const std::string& path);

std::string channel_name(Channel c);
Channel channel_from_name(const std::string& name);
std::string spin_sel_name(SpinSel sel);
SpinSel spin_sel_from_name(const std::string& name);

} // namespace ionreg
