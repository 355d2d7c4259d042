#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dnncov/campaign.hpp"

namespace dnncov {

inline constexpr int kReportSchemaVersion = 1;

/// Report schema v1 as JSON text (docs/report_schema.md). Keys are sorted, so
/// equal reports serialize to identical bytes.
std::string report_to_string(const CampaignReport& report);
CampaignReport parse_report(std::string_view text);

/// Throws kIo if the parent directory does not exist or the write fails.
void write_report(const CampaignReport& report, const std::filesystem::path& path);
CampaignReport read_report(const std::filesystem::path& path);

/// Plain-text table of the four headline metrics plus per-model rows.
std::string summary_table(const CampaignReport& report);

/// Config <-> JSON, shared by the report's config echo and config files.
std::string config_to_string(const CampaignConfig& config);

}  // namespace dnncov
