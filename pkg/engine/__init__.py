from ._Scenario import (
    AgentPlan,
    Departure,
    Mode,
    Policy,
    Scenario,
    ScenarioError,
    ScriptedAgent,
    bins_to_departures,
    read_scenario,
    scale_schedule,
)
from ._Audit import AuditError, StepAuditor, audit_log
from ._Run import Agent, AgentState, Event, EventLog, RunOutput, replicate, run
from ._Files import read_events, read_run_info, read_summary, write_events, write_run, write_run_info, write_summary

__all__ = [
    "AgentPlan",
    "Departure",
    "Mode",
    "Policy",
    "Scenario",
    "ScenarioError",
    "ScriptedAgent",
    "bins_to_departures",
    "read_scenario",
    "scale_schedule",
    "AuditError",
    "StepAuditor",
    "audit_log",
    "Agent",
    "AgentState",
    "Event",
    "EventLog",
    "RunOutput",
    "replicate",
    "run",
    "read_events",
    "read_run_info",
    "read_summary",
    "write_events",
    "write_run",
    "write_run_info",
    "write_summary",
]

__version__ = "1.0.0"
__author__ = "Dashtiss"
__license__ = "MIT"
