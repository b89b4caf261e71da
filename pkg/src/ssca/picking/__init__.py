from .routing import (
    MachineRoute,
    RouteGuardError,
    exact_route,
    feasible_locations,
    greedy_route,
    route_legs,
    route_machine,
    route_machine_exact,
    route_machine_greedy,
    route_time,
)
from .simulate import (
    EvalMetrics,
    OrderRecord,
    SplitPlan,
    evaluate_order,
    minimal_machine_sets,
    simulate,
    split_order,
    stocking_machines,
    write_order_results,
    write_summary,
)
from .travel import dual_command_time, expected_max_sort, nearest_io_time, one_way_time, sample_max_sort

__all__ = [
    "EvalMetrics",
    "MachineRoute",
    "OrderRecord",
    "RouteGuardError",
    "SplitPlan",
    "dual_command_time",
    "evaluate_order",
    "exact_route",
    "expected_max_sort",
    "feasible_locations",
    "greedy_route",
    "minimal_machine_sets",
    "nearest_io_time",
    "one_way_time",
    "route_legs",
    "route_machine",
    "route_machine_exact",
    "route_machine_greedy",
    "route_time",
    "sample_max_sort",
    "simulate",
    "split_order",
    "stocking_machines",
    "write_order_results",
    "write_summary",
]
