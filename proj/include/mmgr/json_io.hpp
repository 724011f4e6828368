#pragma once

// JSON renderings of the domain records. Field order is fixed and is the
// documented wire order (docs/api.md).

#include "mmgr/artifact_store.hpp"
#include "mmgr/deployer.hpp"
#include "mmgr/drift_monitor.hpp"
#include "mmgr/error.hpp"
#include "mmgr/lineage.hpp"
#include "mmgr/metrics.hpp"
#include "mmgr/orchestrator.hpp"
#include "mmgr/registry.hpp"

#include <string>
#include <string_view>

namespace mmgr {

Json to_json(const BlobRef& r);
Json to_json(const Dataset& d);
Json to_json(const Snapshot& s);
Json to_json(const LineageEdge& e);
Json to_json(const TrainingRun& r);
Json to_json(const ModelRecord& m);
Json to_json(const Metrics& m);
Json to_json(const EvaluationReport& r);
Json to_json(const SkipRecord& s);
Json to_json(const GateVerdict& v);
Json to_json(const DeploymentRecord& d);
Json to_json(const AgentCommand& c);
Json to_json(const DriftState& s);
Json to_json(const FeedbackEvent& e);
Json to_json(const TuningJob& j);
Json to_json(const Notification& n);
Json to_json(const AuditReport& a);

GateVerdict gate_from_json(const Json& j);
/// Parses one feedback wire record; validation errors on missing or
/// mistyped fields.
FeedbackEvent feedback_from_json(const Json& j);
InputSchema schema_from_json(const Json& j);
Json to_json(const InputSchema& s);

/// Parses a request body as a JSON object, raising validation errors.
Json parse_object(std::string_view body);

std::string dump_line(const Json& j);

}  // namespace mmgr
