//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
// MoleculeNet-style CSV ingestion: a "smiles" column plus one label column
// per task; blank cells are masked, unparseable rows are dropped and counted.
#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmsg/chem/smiles.hpp"
#include "mmsg/model.hpp"

namespace mmsg::data {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct MissingSmilesColumn : std::runtime_error {
  MissingSmilesColumn()
      : std::runtime_error("CSV has no 'smiles' column (case-insensitive)") {}
};

struct EmptyDataset : std::runtime_error {
  EmptyDataset() : std::runtime_error("dataset has no usable rows") {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct DatasetTable {
  std::vector<std::string> smiles;
  diff::Mat labels;  // n x tasks
  diff::Mat mask;    // n x tasks, 1 where labeled
  std::vector<std::string> task_names;
  model::TaskType task_type = model::TaskType::regression;
  int rows_in = 0;
  int rows_dropped = 0;

  int size() const { return static_cast<int>(smiles.size()); }
  int tasks() const { return static_cast<int>(task_names.size()); }
};

namespace detail {

/// RFC-4180 style line split with double-quote escaping.
inline std::vector<std::string> split_csv_record(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c == '\r') {
      // tolerate CRLF
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace detail

/// Load a task table. Rows whose SMILES fail to parse are dropped and
/// counted in rows_dropped. Classification labels must be 0/1/blank.
inline DatasetTable load_csv(const std::string& path,
                             model::TaskType task_type) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset file is empty: " + path);
  auto header = detail::split_csv_record(line);
  int smiles_col = -1;
  DatasetTable table;
  table.task_type = task_type;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (detail::lower(header[i]) == "smiles" && smiles_col < 0)
      smiles_col = static_cast<int>(i);
    else
      table.task_names.push_back(header[i]);
  }
  if (smiles_col < 0) throw MissingSmilesColumn();
  if (table.task_names.empty())
    throw DataError("dataset has no label columns: " + path);

  std::vector<std::vector<double>> label_rows;
  std::vector<std::vector<double>> mask_rows;
  while (std::getline(in, line)) {
    if (detail::is_blank(line)) continue;
    ++table.rows_in;
    auto fields = detail::split_csv_record(line);
    if (fields.size() != header.size())
      throw DataError("row has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()));
    const std::string& smi = fields[static_cast<std::size_t>(smiles_col)];
    try {
      (void)chem::parse(smi);
    } catch (const std::exception&) {
      ++table.rows_dropped;
      continue;
    }
    std::vector<double> labels, mask;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (static_cast<int>(i) == smiles_col) continue;
      if (detail::is_blank(fields[i])) {
        labels.push_back(0.0);
        mask.push_back(0.0);
      } else {
        double v;
        try {
          v = std::stod(fields[i]);
        } catch (const std::exception&) {
          throw DataError("non-numeric label '" + fields[i] + "'");
        }
        if (task_type == model::TaskType::classification && v != 0.0 &&
            v != 1.0)
          throw DataError("classification label must be 0/1/blank, got '" +
                          fields[i] + "'");
        labels.push_back(v);
        mask.push_back(1.0);
      }
    }
    table.smiles.push_back(smi);
    label_rows.push_back(std::move(labels));
    mask_rows.push_back(std::move(mask));
  }
  if (table.smiles.empty()) throw EmptyDataset();
  table.labels.resize(table.size(), table.tasks());
  table.mask.resize(table.size(), table.tasks());
  for (int i = 0; i < table.size(); ++i)
    for (int j = 0; j < table.tasks(); ++j) {
      table.labels(i, j) = label_rows[static_cast<std::size_t>(i)]
                                     [static_cast<std::size_t>(j)];
      table.mask(i, j) = mask_rows[static_cast<std::size_t>(i)]
                                  [static_cast<std::size_t>(j)];
    }
  return table;
}

}  // namespace mmsg::data
