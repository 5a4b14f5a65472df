#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rugbayes {

// One row of the match file.
struct MatchRecord {
  int round = 0;
  std::string home_team;
  std::string away_team;
  int home_score = 0;
  int away_score = 0;
  int home_tries = 0;
  int away_tries = 0;
  int home_conv_att = 0;
  int home_pen_att = 0;
  int home_drop_att = 0;
  int away_conv_att = 0;
  int away_pen_att = 0;
  int away_drop_att = 0;
  bool attendance = false;
  bool weekend = false;
  bool canceled = false;
  // Continuous score difference in points. Present only in synthetic files;
  // when set it replaces home_score - away_score as the observed outcome.
  std::optional<double> y_raw;

  double raw_diff() const { return y_raw ? *y_raw : static_cast<double>(home_score - away_score); }

  bool operator==(const MatchRecord&) const = default;
};

// Played matches of a season. Team indices follow first appearance among the
// played matches.
struct Dataset {
  std::vector<std::string> teams;
  std::vector<MatchRecord> matches;

  std::size_t nteams() const { return teams.size(); }
  std::size_t ngames() const { return matches.size(); }
  // Returns -1 when the team is unknown.
  int team_index(std::string_view name) const;

  bool operator==(const Dataset&) const = default;
};

struct ParseReport {
  std::size_t rows = 0;
  std::size_t canceled = 0;
  std::vector<std::string> warnings;
};

struct ParsedMatches {
  Dataset dataset;
  ParseReport report;
};

inline constexpr std::string_view kMatchHeader =
    "round,home_team,away_team,home_score,away_score,home_tries,away_tries,"
    "home_conv_att,home_pen_att,home_drop_att,away_conv_att,away_pen_att,away_drop_att,"
    "attendance,weekend,canceled";

ParsedMatches parse_matches(std::istream& in, std::string_view source = "<stream>");
ParsedMatches parse_matches(const std::filesystem::path& path);

// Writes played matches using the match schema. A trailing y_raw column is
// added when any record carries one.
void write_matches(std::ostream& out, const Dataset& dataset);

struct PrevSeasonRow {
  std::string team;
  double scored = 0.0;
  double received = 0.0;
};

// Previous-season attack/defence totals, in file order. "scored" and
// "received" are tries or points depending on the table supplied.
struct PrevSeasonTable {
  std::vector<PrevSeasonRow> rows;

  const PrevSeasonRow* find(std::string_view team) const;
  std::size_t size() const { return rows.size(); }
};

PrevSeasonTable parse_prev_season(std::istream& in, std::string_view source = "<stream>");
PrevSeasonTable parse_prev_season(const std::filesystem::path& path);
void write_prev_season(std::ostream& out, const PrevSeasonTable& table);

}  // namespace rugbayes
