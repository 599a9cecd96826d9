#include "gtexpand/corpus_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gtexpand {

namespace {

using ojson = nlohmann::ordered_json;

// Recursive-descent reader for the list literal after "####".
class LiteralReader {
 public:
  LiteralReader(std::string_view text, std::size_t line_no) : s_(text), line_(line_no) {}

  std::vector<std::vector<std::string>> quad_list() {
    std::vector<std::vector<std::string>> out;
    skip();
    expect('[');
    skip();
    if (peek() == ']') {
      ++pos_;
    } else {
      for (;;) {
        out.push_back(tuple());
        skip();
        if (peek() == ',') {
          ++pos_;
          skip();
          if (peek() == ']') {  // trailing comma
            ++pos_;
            break;
          }
          continue;
        }
        expect(']');
        break;
      }
    }
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing text");
    return out;
  }

 private:
  std::vector<std::string> tuple() {
    skip();
    const char open = peek();
    if (open != '[' && open != '(') fail("expected '[' or '(' to open a quadruple");
    const char close = open == '[' ? ']' : ')';
    ++pos_;
    std::vector<std::string> items;
    skip();
    if (peek() != close) {
      for (;;) {
        skip();
        items.push_back(string());
        skip();
        if (peek() == ',') {
          ++pos_;
          skip();
          if (peek() == close) break;
          continue;
        }
        break;
      }
    }
    expect(close);
    if (items.size() != 4) {
      fail("quadruple has " + std::to_string(items.size()) + " elements, expected 4");
    }
    return items;
  }

  std::string string() {
    const char q = peek();
    if (q != '\'' && q != '"') fail("expected a quoted string");
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != q) {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        c = s_[pos_++];
        switch (c) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          default: break;  // \' \" \\ and anything else: the char itself
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " at column " + std::to_string(pos_ + 1) + " of the GT list", line_);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

ojson quad_json(const Quadruple& q) {
  return ojson::array({q.aspect.text(), q.category.value(), std::string(to_string(q.sentiment)), q.opinion.text()});
}

Quadruple quad_from(const ojson& j, const Taxonomy& taxonomy) {
  if (!j.is_array() || j.size() != 4) throw SchemaError("quadruple must be a 4-element list");
  return make_quadruple(j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>(),
                        j[3].get<std::string>(), taxonomy);
}

}  // namespace

// ---------------------------------------------------------------------------

DatasetLine parse_dataset_line(std::string_view line, const Taxonomy& taxonomy, std::size_t line_no) {
  const auto sep = line.find("####");
  if (sep == std::string_view::npos) throw ParseError("missing '####' separator", line_no);
  DatasetLine out;
  out.sentence = normalize_text(line.substr(0, sep));
  if (out.sentence.empty()) throw ParseError("empty sentence", line_no);
  LiteralReader reader(line.substr(sep + 4), line_no);
  for (const auto& q : reader.quad_list()) {
    try {
      out.quads.push_back(make_quadruple(q[0], q[1], q[2], q[3], taxonomy));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

Dataset read_dataset(const std::filesystem::path& path, std::shared_ptr<const Taxonomy> taxonomy,
                     std::string name) {
  auto in = open_in(path);
  Dataset ds;
  ds.name = name.empty() ? path.stem().string() : std::move(name);
  ds.taxonomy = std::move(taxonomy);
  std::size_t index = 0;
  for (std::string line; std::getline(in, line); ++index) {
    line = strip_cr(std::move(line));
    if (normalize_text(line).empty()) continue;
    DatasetLine parsed;
    try {
      parsed = parse_dataset_line(line, *ds.taxonomy, index + 1);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    Example ex{example_id(ds.name, index), parsed.sentence, {}};
    for (const auto& q : parsed.quads) ex.groups.push_back(GtGroup::singleton(q));
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

std::vector<Shot> read_shots(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  auto in = open_in(path);
  std::vector<Shot> shots;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (normalize_text(line).empty()) continue;
    try {
      auto parsed = parse_dataset_line(line, taxonomy, line_no);
      shots.push_back({parsed.sentence, parsed.quads});
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return shots;
}

// ---------------------------------------------------------------------------

std::string expanded_record(const Example& example, const Taxonomy& taxonomy) {
  ojson rec;
  rec["id"] = example.id;
  rec["taxonomy"] = taxonomy.name();
  rec["sentence"] = example.sentence;
  rec["groups"] = ojson::array();
  for (const auto& g : example.groups) {
    ojson gj;
    gj["original"] = quad_json(g.original());
    gj["variants"] = ojson::array();
    for (const auto& v : g.variants()) {
      ojson vj;
      vj["quad"] = quad_json(v.quadruple);
      vj["aspect_origin"] = to_string(v.aspect_origin);
      vj["opinion_origin"] = to_string(v.opinion_origin);
      vj["judge_aspect"] = to_string(v.judge_aspect);
      vj["judge_opinion"] = to_string(v.judge_opinion);
      gj["variants"].push_back(std::move(vj));
    }
    gj["rejected"] = ojson::array();
    for (const auto& r : g.rejected()) {
      ojson rj;
      rj["element"] = to_string(r.element);
      rj["term"] = r.term.text();
      rj["origin"] = to_string(r.origin);
      rj["reason"] = to_string(r.reason);
      gj["rejected"].push_back(std::move(rj));
    }
    rec["groups"].push_back(std::move(gj));
  }
  return rec.dump();
}

void write_expanded(const ExpandedDataset& dataset, std::ostream& out) {
  for (const auto& ex : dataset.examples) out << expanded_record(ex, *dataset.taxonomy) << '\n';
  if (!out) throw Error("write failed");
}

void write_expanded(const ExpandedDataset& dataset, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_expanded(dataset, out);
}

ExpandedDataset read_expanded(std::istream& in, const std::string& source) {
  ExpandedDataset ds;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (normalize_text(line).empty()) continue;
    std::string where = source + " line " + std::to_string(line_no);
    try {
      const ojson rec = ojson::parse(line);
      const std::string id = rec.at("id").get<std::string>();
      where = source + " record '" + id + "'";
      const std::string tax_name = rec.at("taxonomy").get<std::string>();
      if (!ds.taxonomy) {
        ds.taxonomy = Taxonomy::resolve(tax_name);
        const auto colon = id.rfind(':');
        ds.name = colon == std::string::npos ? std::filesystem::path(source).stem().string() : id.substr(0, colon);
      } else if (ds.taxonomy->name() != tax_name) {
        throw SchemaError("taxonomy '" + tax_name + "' differs from '" + ds.taxonomy->name() + "'");
      }
      const Taxonomy& tax = *ds.taxonomy;
      Example ex{id, rec.at("sentence").get<std::string>(), {}};
      for (const auto& gj : rec.at("groups")) {
        Quadruple original = quad_from(gj.at("original"), tax);
        std::vector<Variant> variants;
        for (const auto& vj : gj.at("variants")) {
          variants.push_back(Variant{quad_from(vj.at("quad"), tax),
                                     parse_origin(vj.at("aspect_origin").get<std::string>()),
                                     parse_origin(vj.at("opinion_origin").get<std::string>()),
                                     parse_verdict_label(vj.at("judge_aspect").get<std::string>()),
                                     parse_verdict_label(vj.at("judge_opinion").get<std::string>())});
        }
        std::vector<RejectedTerm> rejected;
        for (const auto& rj : gj.value("rejected", ojson::array())) {
          rejected.push_back(RejectedTerm{parse_element(rj.at("element").get<std::string>()),
                                          Term(rj.at("term").get<std::string>()),
                                          parse_origin(rj.at("origin").get<std::string>()),
                                          parse_reject_reason(rj.at("reason").get<std::string>())});
        }
        ex.groups.emplace_back(std::move(original), std::move(variants), std::move(rejected));
      }
      ds.examples.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(where + ": " + e.what());
    } catch (const Error& e) {
      throw SchemaError(where + ": " + e.what());
    }
  }
  if (!ds.taxonomy) throw SchemaError(source + ": no records");
  return ds;
}

ExpandedDataset read_expanded(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_expanded(in, path.string());
}

// ---------------------------------------------------------------------------

void write_run_records(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& r : records) {
    ojson j;
    j["id"] = r.id;
    j["raw_output"] = r.raw_output;
    out << j.dump() << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<RunRecord> read_run_records(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<RunRecord> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (normalize_text(line).empty()) continue;
    try {
      const auto j = ojson::parse(line);
      if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
        throw ParseError("record has no id", line_no);
      }
      out.push_back({j["id"].get<std::string>(),
                     j.contains("raw_output") && j["raw_output"].is_string() ? j["raw_output"].get<std::string>() : ""});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_runset(const RunSet& run, const ElementOrder& order, const std::filesystem::path& path) {
  std::vector<RunRecord> records;
  for (const auto& [id, preds] : run.predictions) records.push_back({id, render_as_text(preds.quads, order)});
  write_run_records(records, path);
}

RunRead read_runset(const std::filesystem::path& path, const ElementOrder& order, const Taxonomy& taxonomy,
                    std::string run_id) {
  RunRead out;
  out.run.run_id = run_id.empty() ? path.stem().string() : std::move(run_id);
  for (const auto& rec : read_run_records(path)) {
    if (out.run.predictions.count(rec.id)) throw ParseError(path.string() + ": duplicate id '" + rec.id + "'");
    auto parsed = parse_tagged(rec.raw_output, order, taxonomy);
    if (parsed.unparseable) {
      out.diagnostics.push_back(rec.id + ": " + (parsed.diagnostics.empty() ? "unparseable" : parsed.diagnostics.front()));
    } else {
      for (const auto& d : parsed.diagnostics) out.warnings.push_back(rec.id + ": " + d);
    }
    out.run.predictions[rec.id] = PredictionSet{std::move(parsed.quads), parsed.malformed};
  }
  return out;
}

}  // namespace gtexpand
