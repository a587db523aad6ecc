#include "dwpkit/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace dwpkit::io {

using jsonio::json;
using jsonio::Reader;

namespace {

json write_stats(const data::ColumnStats& s) {
  return {{"mean", s.mean}, {"stddev", s.stddev}};
}

data::ColumnStats read_stats(const Reader& r, std::size_t cols) {
  r.only({"mean", "stddev"});
  data::ColumnStats s{r.numbers("mean"), r.numbers("stddev")};
  if (s.mean.size() != cols || s.stddev.size() != cols) {
    r.fail("expected " + std::to_string(cols) + " columns");
  }
  for (double sd : s.stddev)
    if (!(sd > 0.0)) r.fail_at("stddev", "entries must be positive");
  return s;
}

}  // namespace

std::string to_json(const Checkpoint& c) {
  json params = json::object();
  for (const auto& b : c.params.layout.blocks()) {
    json data = json::array();
    for (std::size_t k = 0; k < b.size(); ++k) data.push_back(jsonio::number(c.params.theta[b.offset + k]));
    params[b.name] = {{"rows", b.rows}, {"cols", b.cols}, {"data", std::move(data)}};
  }
  json doc = {{"schema", kCheckpointSchema},
              {"family", vi::family_name(c.family)},
              {"seed", c.seed},
              {"config", jsonio::write_model(c.config)},
              {"params", std::move(params)},
              {"normalisation", {{"x", write_stats(c.norm.x)}, {"y", write_stats(c.norm.y)}}}};
  return doc.dump(1) + "\n";
}

Checkpoint from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  const Reader r(doc, "checkpoint");
  r.only({"schema", "family", "seed", "config", "params", "normalisation"});
  jsonio::require_schema(r);

  Checkpoint c;
  try {
    c.family = vi::parse_family(r.string("family"));
  } catch (const Error& e) {
    r.fail_at("family", e.what());
  }
  c.seed = r.count("seed");
  c.config = jsonio::read_model(r.object("config"), 1, 1);
  c.params.layout = vi::make_layout(c.config);
  c.params.theta.assign(c.params.layout.size(), 0.0);

  const Reader pr = r.object("params");
  for (const auto& b : c.params.layout.blocks()) {
    const Reader br = pr.object(b.name);
    if (br.count("rows") != b.rows || br.count("cols") != b.cols) {
      br.fail("shape does not match the config (expected " + shape_string(b.rows, b.cols) + ")");
    }
    const auto values = br.numbers("data");
    if (values.size() != b.size()) br.fail_at("data", "expected " + std::to_string(b.size()) + " values");
    std::copy(values.begin(), values.end(), c.params.theta.begin() + static_cast<long>(b.offset));
  }
  if (doc["params"].size() != c.params.layout.blocks().size()) {
    pr.fail("unexpected parameter blocks for this config");
  }

  const Reader nr = r.object("normalisation");
  nr.only({"x", "y"});
  c.norm.x = read_stats(nr.object("x"), c.config.input_dim);
  c.norm.y = read_stats(nr.object("y"), c.config.output_dim);
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << to_json(c);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace dwpkit::io
