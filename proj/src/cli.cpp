#include "mmgr/cli.hpp"

#include "mmgr/agent.hpp"
#include "mmgr/config.hpp"
#include "mmgr/http.hpp"
#include "mmgr/json_io.hpp"
#include "mmgr/op_table.hpp"
#include "mmgr/service.hpp"
#include "mmgr/table.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

namespace mmgr {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_input(const std::string& file) {
  if (file == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  std::ifstream in(file, std::ios::binary);
  if (!in) throw UsageError("cannot read file: " + file);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Json field_value(const OpField& f, const std::string& text) {
  const std::string name(f.name);
  switch (f.type) {
    case FieldType::string: return text;
    case FieldType::number: {
      double v = 0;
      if (!parse_decimal(text, v)) throw UsageError("--" + name + " expects a number");
      return v;
    }
    case FieldType::integer: {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) throw UsageError("--" + name + " expects an integer");
      return v;
    }
    case FieldType::boolean:
      if (text == "true") return true;
      if (text == "false") return false;
      throw UsageError("--" + name + " expects true or false");
    case FieldType::list: {
      Json out = Json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
      }
      return out;
    }
    case FieldType::json: {
      Json v = Json::parse(text, nullptr, false);
      if (v.is_discarded()) throw UsageError("--" + name + " expects JSON");
      return v;
    }
  }
  return text;
}

std::string cell(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "-";
  return v.dump();
}

void print_table(const OpSpec& op, const Json& j, std::ostream& out) {
  if (j.is_array()) {
    if (!op.columns.empty()) {
      for (std::size_t c = 0; c < op.columns.size(); ++c) out << (c ? "\t" : "") << op.columns[c];
      out << "\n";
      for (const auto& row : j) {
        for (std::size_t c = 0; c < op.columns.size(); ++c) {
          const std::string key(op.columns[c]);
          out << (c ? "\t" : "") << (row.is_object() && row.contains(key) ? cell(row[key]) : "-");
        }
        out << "\n";
      }
    } else {
      for (const auto& row : j) out << cell(row) << "\n";
    }
  } else if (j.is_object()) {
    for (const auto& [k, v] : j.items()) out << k << "\t" << cell(v) << "\n";
  } else {
    out << cell(j) << "\n";
  }
}

struct OpCommand {
  const OpSpec* op;
  CLI::App* app;
  std::map<std::string, std::string> values;
};

struct Globals {
  std::string endpoint;
  std::string format = "table";
  std::string config;
};

std::string default_endpoint(const Globals& g) {
  if (!g.endpoint.empty()) return g.endpoint;
  Config c = g.config.empty() ? Config{} : Config::load(g.config);
  return "http://" + c.host + ":" + std::to_string(c.port);
}

int call_op(const OpCommand& cmd, const Globals& g, std::ostream& out, std::ostream& err) {
  const OpSpec& op = *cmd.op;
  std::string path(op.path);
  std::string query;
  Json body = Json::object();
  std::string raw;
  bool has_raw = false;
  for (const auto& f : op.fields) {
    auto it = cmd.values.find(std::string(f.name));
    if (it == cmd.values.end()) continue;
    const std::string& v = it->second;
    switch (f.location) {
      case FieldLocation::path: {
        const std::string token = "{" + std::string(f.name) + "}";
        path.replace(path.find(token), token.size(), url_encode(v));
        break;
      }
      case FieldLocation::query:
        field_value(f, v);
        query += (query.empty() ? "?" : "&") + std::string(f.name) + "=" + url_encode(v);
        break;
      case FieldLocation::body:
        body[std::string(f.name)] = field_value(f, v);
        break;
      case FieldLocation::raw_body:
        raw = read_input(v);
        has_raw = true;
        break;
    }
  }
  const bool has_body_fields = std::any_of(op.fields.begin(), op.fields.end(),
                                           [](const OpField& f) { return f.location == FieldLocation::body; });
  const std::string payload = has_raw ? raw : has_body_fields ? body.dump() : std::string();
  const std::string content_type = has_raw ? "application/octet-stream" : "application/json";

  HttpClient http(default_endpoint(g));
  const HttpResult r = http.request(op.method, path + query, payload, content_type);
  if (r.status == 0) {
    err << "error: service unreachable (" << r.body << ")\n";
    return 1;
  }
  if (r.status != 200) {
    err << r.body << "\n";
    return 1;
  }
  if (op.response != ResponseKind::json) {
    out << r.body;
    return 0;
  }
  if (g.format == "json") {
    out << r.body << "\n";
  } else {
    print_table(op, Json::parse(r.body), out);
  }
  return 0;
}

int serve(const Globals& g, const std::string& data_dir, const std::string& host, int port, int workers,
          std::ostream& out) {
  Config c = g.config.empty() ? Config{} : Config::load(g.config);
  c.apply_environment();
  if (!data_dir.empty()) c.data_dir = data_dir;
  if (!host.empty()) c.host = host;
  if (port >= 0) c.port = port;
  if (workers >= 0) c.jobs.worker_count = static_cast<unsigned>(workers);
  Service service(c);
  HttpServer server(service);
  service.jobs().pump();
  out << "mmgr serving " << c.data_dir.string() << " on http://" << c.host << ":" << c.port << std::endl;
  server.serve_forever(c.host, c.port);
  return 0;
}

int agent_run(const Globals& g, const std::string& deployment, const std::string& process_file, std::uint64_t steps,
              std::uint64_t poll, const std::string& version, std::ostream& out) {
  const ProcessSpec process = process_from_json(nlohmann::json::parse(read_input(process_file)));
  HttpClient http(default_endpoint(g));
  const HttpResult r = http.request("GET", "/deployments/" + url_encode(deployment));
  if (r.status != 200) fail(ErrorCode::not_found, "cannot load deployment " + deployment + ": " + r.body);
  const Json dep = Json::parse(r.body);
  HttpServiceClient client(default_endpoint(g));
  const std::string bundle = client.fetch_blob(dep.at("bundle").at("hash").get<std::string>());
  AgentOptions options;
  options.poll_interval = poll;
  if (!version.empty()) options.version = version;
  EdgeAgent agent(client, deployment, bundle, options);
  out << agent.run(process, steps).to_jsonl();
  return 0;
}

struct Cli {
  CLI::App app{"mmgr: model management service and client"};
  Globals g;
  std::vector<OpCommand> ops;
  CLI::App* serve_cmd = nullptr;
  CLI::App* agent_run_cmd = nullptr;
  CLI::App* agent_csv_cmd = nullptr;
  std::string data_dir, host;
  int port = -1, workers = -1;
  std::string deployment, process_file;
  std::uint64_t steps = 1000, poll = 10, rows = 200, seed = 0;
  std::string version;

  Cli() {
    app.require_subcommand(1);
    app.add_option("--endpoint", g.endpoint, "service URL (default from --config, else http://127.0.0.1:8710)");
    app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"json", "table"}));
    app.add_option("--config", g.config, "configuration file");

    std::map<std::string, CLI::App*> nouns;
    ops.reserve(op_table().size());
    for (const auto& op : op_table()) {
      const std::string noun(op.noun);
      if (!nouns.count(noun)) {
        nouns[noun] = app.add_subcommand(noun, noun + " commands");
        nouns[noun]->require_subcommand(1);
      }
      ops.push_back({&op, nullptr, {}});
    }
    for (auto& cmd : ops) {
      CLI::App* verb = nouns[std::string(cmd.op->noun)]->add_subcommand(std::string(cmd.op->verb),
                                                                        std::string(cmd.op->summary));
      cmd.app = verb;
      for (const auto& f : cmd.op->fields) {
        auto* opt = verb->add_option("--" + std::string(f.name), cmd.values[std::string(f.name)], std::string(f.help));
        if (f.required) opt->required();
      }
    }

    serve_cmd = app.add_subcommand("serve", "run the HTTP service");
    serve_cmd->add_option("--data-dir", data_dir, "data directory (overrides config and MMGR_DATA_DIR)");
    serve_cmd->add_option("--host", host, "bind address");
    serve_cmd->add_option("--port", port, "port")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--workers", workers, "job worker threads (0 runs jobs inline)")->check(CLI::Range(0, 64));

    auto* agent = app.add_subcommand("agent", "simulated edge agent");
    agent->require_subcommand(1);
    agent_run_cmd = agent->add_subcommand("run", "serve a deployment on a synthetic process");
    agent_run_cmd->add_option("--deployment", deployment, "deployment id")->required();
    agent_run_cmd->add_option("--process", process_file, "process spec JSON file")->required();
    agent_run_cmd->add_option("--steps", steps, "steps to simulate");
    agent_run_cmd->add_option("--poll-interval", poll, "steps between command polls")->check(CLI::PositiveNumber);
    agent_run_cmd->add_option("--agent-version", version, "runtime version the agent reports");
    agent_csv_cmd = agent->add_subcommand("gen-csv", "synthetic training CSV from a process spec");
    agent_csv_cmd->add_option("--process", process_file, "process spec JSON file")->required();
    agent_csv_cmd->add_option("--rows", rows, "row count");
    agent_csv_cmd->add_option("--seed", seed, "sampling seed");
  }
};

}  // namespace

std::vector<std::string> cli_commands() {
  Cli cli;
  std::vector<std::string> out;
  for (auto* noun : cli.app.get_subcommands([](CLI::App*) { return true; })) {
    for (auto* verb : noun->get_subcommands([](CLI::App*) { return true; })) {
      out.push_back(noun->get_name() + " " + verb->get_name());
    }
    if (noun->get_subcommands([](CLI::App*) { return true; }).empty()) out.push_back(noun->get_name());
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    cli.app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = cli.app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*cli.serve_cmd) return serve(cli.g, cli.data_dir, cli.host, cli.port, cli.workers, out);
    if (*cli.agent_run_cmd) {
      return agent_run(cli.g, cli.deployment, cli.process_file, cli.steps, cli.poll, cli.version, out);
    }
    if (*cli.agent_csv_cmd) {
      const auto p = process_from_json(nlohmann::json::parse(read_input(cli.process_file)));
      out << generate_training_csv(p, cli.rows, cli.seed);
      return 0;
    }
    for (const auto& cmd : cli.ops) {
      if (*cmd.app) {
        OpCommand call{cmd.op, cmd.app, {}};
        for (const auto& f : cmd.op->fields) {
          if (cmd.app->get_option("--" + std::string(f.name))->count() > 0) {
            call.values[std::string(f.name)] = cmd.values.at(std::string(f.name));
          }
        }
        return call_op(call, cli.g, out, err);
      }
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << ApiDispatcher::error_response(e.code(), e.what(), e.detail()).body << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mmgr
