#include "rugbayes/ingest.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "rugbayes/csv.hpp"
#include "rugbayes/errors.hpp"

namespace rugbayes {
namespace {

constexpr std::string_view kModule = "ingest";

std::string where(std::string_view source, std::size_t line) {
  std::ostringstream os;
  os << source << ':' << line;
  return os.str();
}

[[noreturn]] void fail(std::string_view source, std::size_t line, const std::string& what) {
  throw InputError(kModule, where(source, line) + ": " + what);
}

int parse_count(const std::string& cell, std::string_view column, std::string_view source, std::size_t line) {
  std::int64_t v = 0;
  if (!csv::parse_int(cell, v)) fail(source, line, "column '" + std::string(column) + "' is not an integer: '" + cell + "'");
  if (v < 0) fail(source, line, "column '" + std::string(column) + "' is negative: " + cell);
  if (v > 100000) fail(source, line, "column '" + std::string(column) + "' is implausibly large: " + cell);
  return static_cast<int>(v);
}

bool parse_flag(const std::string& cell, std::string_view column, std::string_view source, std::size_t line) {
  if (cell == "0") return false;
  if (cell == "1") return true;
  fail(source, line, "column '" + std::string(column) + "' must be 0 or 1, got '" + cell + "'");
}

std::string strip_bom(std::string line) {
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF && static_cast<unsigned char>(line[1]) == 0xBB &&
      static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  return line;
}

std::string row_key(const MatchRecord& m) {
  std::ostringstream os;
  os << m.round << '|' << m.home_team << '|' << m.away_team << '|' << m.home_score << '|' << m.away_score << '|'
     << m.home_tries << '|' << m.away_tries << '|' << m.home_conv_att << '|' << m.home_pen_att << '|'
     << m.home_drop_att << '|' << m.away_conv_att << '|' << m.away_pen_att << '|' << m.away_drop_att << '|'
     << m.attendance << m.weekend << m.canceled << '|' << (m.y_raw ? csv::format_double(*m.y_raw) : "");
  return os.str();
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(kModule, "cannot open file '" + path.string() + "'");
  return in;
}

}  // namespace

int Dataset::team_index(std::string_view name) const {
  const auto it = std::find(teams.begin(), teams.end(), name);
  return it == teams.end() ? -1 : static_cast<int>(it - teams.begin());
}

ParsedMatches parse_matches(std::istream& in, std::string_view source) {
  ParsedMatches result;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool has_y_raw = false;
  std::set<std::string> seen;

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) line = strip_bom(std::move(line));
    if (csv::trim(line).empty()) continue;

    if (!have_header) {
      const std::string header(csv::trim(line));
      if (header == kMatchHeader) {
        has_y_raw = false;
      } else if (header == std::string(kMatchHeader) + ",y_raw") {
        has_y_raw = true;
      } else {
        fail(source, line_no, "header does not match the match schema");
      }
      have_header = true;
      continue;
    }

    const auto cells = csv::split_line(line);
    const std::size_t expected = has_y_raw ? 17 : 16;
    if (cells.size() != expected) {
      fail(source, line_no, "expected " + std::to_string(expected) + " columns, got " + std::to_string(cells.size()));
    }

    MatchRecord m;
    std::int64_t round = 0;
    if (!csv::parse_int(cells[0], round) || round < 1) fail(source, line_no, "round must be a positive integer: '" + cells[0] + "'");
    m.round = static_cast<int>(round);
    m.home_team = cells[1];
    m.away_team = cells[2];
    if (m.home_team.empty() || m.away_team.empty()) fail(source, line_no, "empty team name");
    if (m.home_team == m.away_team) fail(source, line_no, "team '" + m.home_team + "' plays itself");
    m.home_score = parse_count(cells[3], "home_score", source, line_no);
    m.away_score = parse_count(cells[4], "away_score", source, line_no);
    m.home_tries = parse_count(cells[5], "home_tries", source, line_no);
    m.away_tries = parse_count(cells[6], "away_tries", source, line_no);
    m.home_conv_att = parse_count(cells[7], "home_conv_att", source, line_no);
    m.home_pen_att = parse_count(cells[8], "home_pen_att", source, line_no);
    m.home_drop_att = parse_count(cells[9], "home_drop_att", source, line_no);
    m.away_conv_att = parse_count(cells[10], "away_conv_att", source, line_no);
    m.away_pen_att = parse_count(cells[11], "away_pen_att", source, line_no);
    m.away_drop_att = parse_count(cells[12], "away_drop_att", source, line_no);
    m.attendance = parse_flag(cells[13], "attendance", source, line_no);
    m.weekend = parse_flag(cells[14], "weekend", source, line_no);
    m.canceled = parse_flag(cells[15], "canceled", source, line_no);
    if (has_y_raw) {
      double y = 0.0;
      if (!csv::parse_double(cells[16], y)) fail(source, line_no, "y_raw is not a finite number: '" + cells[16] + "'");
      m.y_raw = y;
    }
    if (m.canceled && (m.home_score != 0 || m.away_score != 0)) {
      fail(source, line_no, "canceled match must carry a 0-0 score");
    }

    ++result.report.rows;
    if (!seen.insert(row_key(m)).second) {
      result.report.warnings.push_back(where(source, line_no) + ": duplicate row kept");
    }
    if (m.canceled) {
      ++result.report.canceled;
      continue;
    }
    auto& teams = result.dataset.teams;
    for (const auto* name : {&m.home_team, &m.away_team}) {
      if (std::find(teams.begin(), teams.end(), *name) == teams.end()) teams.push_back(*name);
    }
    result.dataset.matches.push_back(std::move(m));
  }
  if (!have_header) throw InputError(kModule, std::string(source) + ": missing header");
  return result;
}

ParsedMatches parse_matches(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_matches(in, path.string());
}

void write_matches(std::ostream& out, const Dataset& dataset) {
  const bool has_y_raw =
      std::any_of(dataset.matches.begin(), dataset.matches.end(), [](const MatchRecord& m) { return m.y_raw.has_value(); });
  out << kMatchHeader << (has_y_raw ? ",y_raw" : "") << '\n';
  for (const auto& m : dataset.matches) {
    out << m.round << ',' << m.home_team << ',' << m.away_team << ',' << m.home_score << ',' << m.away_score << ','
        << m.home_tries << ',' << m.away_tries << ',' << m.home_conv_att << ',' << m.home_pen_att << ','
        << m.home_drop_att << ',' << m.away_conv_att << ',' << m.away_pen_att << ',' << m.away_drop_att << ','
        << int(m.attendance) << ',' << int(m.weekend) << ',' << int(m.canceled);
    if (has_y_raw) out << ',' << csv::format_double(m.y_raw.value_or(static_cast<double>(m.home_score - m.away_score)));
    out << '\n';
  }
}

const PrevSeasonRow* PrevSeasonTable::find(std::string_view team) const {
  const auto it = std::find_if(rows.begin(), rows.end(), [&](const PrevSeasonRow& r) { return r.team == team; });
  return it == rows.end() ? nullptr : &*it;
}

PrevSeasonTable parse_prev_season(std::istream& in, std::string_view source) {
  PrevSeasonTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) line = strip_bom(std::move(line));
    if (csv::trim(line).empty()) continue;
    if (!have_header) {
      if (csv::trim(line) != "team,scored,received") fail(source, line_no, "header must be 'team,scored,received'");
      have_header = true;
      continue;
    }
    const auto cells = csv::split_line(line);
    if (cells.size() != 3) fail(source, line_no, "expected 3 columns, got " + std::to_string(cells.size()));
    PrevSeasonRow row;
    row.team = cells[0];
    if (row.team.empty()) fail(source, line_no, "empty team name");
    if (!csv::parse_double(cells[1], row.scored) || row.scored < 0) fail(source, line_no, "'scored' is not a nonnegative number: '" + cells[1] + "'");
    if (!csv::parse_double(cells[2], row.received) || row.received < 0) fail(source, line_no, "'received' is not a nonnegative number: '" + cells[2] + "'");
    if (table.find(row.team)) fail(source, line_no, "team '" + row.team + "' listed twice");
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw InputError(kModule, std::string(source) + ": no teams");
  return table;
}

PrevSeasonTable parse_prev_season(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_prev_season(in, path.string());
}

void write_prev_season(std::ostream& out, const PrevSeasonTable& table) {
  out << "team,scored,received\n";
  for (const auto& r : table.rows) out << r.team << ',' << csv::format_double(r.scored) << ',' << csv::format_double(r.received) << '\n';
}

}  // namespace rugbayes
