#!/usr/bin/env python3
"""Regenerates the bundled catalogs and queries in crates/core/data/."""

import json
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data")
AUTHORED = "authored"


# --- expression helpers -----------------------------------------------------

def lit(b):
    return {"op": "bool", "value": b}


def num(x):
    return {"op": "num", "value": x}


def has(tag):
    return {"op": "has_property", "tag": tag}


def coloc(tag):
    return {"op": "colocated_has_property", "tag": tag}


def scalar(name):
    return {"op": "scalar", "name": name}


def attr(var, entry):
    return {"op": "attr", "var": var, "entry": entry}


def dep(system):
    return {"op": "deployed", "system": system}


def all_of(*args):
    return {"op": "and", "args": list(args)}


def any_of(*args):
    return {"op": "or", "args": list(args)}


def neg(a):
    return {"op": "not", "arg": a}


def cmp(op, a, b):
    return {"op": op, "args": [a, b]}


def mul(*args):
    return {"op": "mul", "args": list(args)}


def count(dt):
    return {"op": "count", "device_type": dt}


def forall(dt, var, body):
    return {"op": "forall", "device_type": dt, "var": var, "body": body}


def alloc(resource, amount, scope, var=None, device_type=None):
    e = {"op": "allocate", "resource": resource, "amount": amount, "scope": scope}
    if var is not None:
        e["var"] = var
    else:
        e["device_type"] = device_type
    return e


def label(expr, text):
    expr = dict(expr)
    expr["label"] = text
    return expr


def every_compute(entry, text):
    return label(forall("COMPUTE", "c", attr("c", entry)), text)


def every_switch(entry, text):
    return label(forall("SWITCH", "s", attr("s", entry)), text)


def system(sid, roles, solves, *constraints, warnings=None):
    body = constraints[0] if len(constraints) == 1 else all_of(*constraints)
    s = {"id": sid, "roles": roles, "solves": solves, "deployment_constraints": body}
    if warnings:
        s["warnings"] = warnings
    return s


def order(objective, subject, relation, obj, condition=None):
    o = {"objective": objective, "subject": subject, "relation": relation, "object": obj}
    if condition is not None:
        o["condition"] = condition
    return o


def better(objective, a, b, condition=None):
    return order(objective, a, "BETTER_THAN", b, condition)


def same(objective, a, b, condition=None):
    return order(objective, a, "SAME_AS", b, condition)


def role(rid, cond, exclusive=True, warning=None):
    r = {"id": rid, "activation_condition": cond, "is_exclusive": exclusive}
    if warning:
        r["warning"] = warning
    return r


# --- datacenter catalog -----------------------------------------------------

def dc_catalog():
    schemas = [
        {"id": "compute_schema", "device_type": "COMPUTE", "entries": {
            "cost": {"kind": "REAL"},
            "cores": {"kind": "EXHAUSTIBLE"},
            "RDMA": {"kind": "BOOL", "default": False},
            "NIC_Reorder_Buffer": {"kind": "REAL"},
            "NIC_TIMESTAMPS": {"kind": "BOOL", "default": False},
            "SmartNIC": {"kind": "BOOL", "default": False},
            "FPGA": {"kind": "EXHAUSTIBLE", "default": 0},
        }},
        {"id": "switch_schema", "device_type": "SWITCH", "entries": {
            "cost": {"kind": "REAL"},
            "programmable": {"kind": "BOOL", "default": False},
            "ECN": {"kind": "BOOL", "default": False},
            "PFC": {"kind": "BOOL", "default": False},
            "QOS_Levels": {"kind": "EXHAUSTIBLE", "default": 1},
        }},
        {"id": "router_schema", "device_type": "ROUTER", "entries": {
            "cost": {"kind": "REAL"},
            "programmable": {"kind": "BOOL", "default": False},
        }},
        {"id": "link_schema", "device_type": "LINK", "entries": {
            "cost": {"kind": "REAL"},
            "link_speed": {"kind": "REAL"},
        }},
    ]

    def hw(hid, schema, desc, **values):
        return {"id": hid, "schema": schema, "values": values, "provenance": AUTHORED, "description": desc}

    hardware = [
        hw("4Cores_rdma", "compute_schema", "4-core server, RDMA NIC", cost=300, cores=4, RDMA=True,
           NIC_Reorder_Buffer=20, NIC_TIMESTAMPS=True),
        hw("8Cores_rdma", "compute_schema", "8-core server, RDMA NIC", cost=450, cores=8, RDMA=True,
           NIC_Reorder_Buffer=10, NIC_TIMESTAMPS=True),
        hw("4Cores_highFPGA", "compute_schema", "4-core server, FPGA SmartNIC", cost=500, cores=4,
           NIC_Reorder_Buffer=64, NIC_TIMESTAMPS=True, SmartNIC=True, FPGA=100),
        hw("8Cores_highFPGA", "compute_schema", "8-core server, FPGA SmartNIC", cost=650, cores=8,
           NIC_Reorder_Buffer=64, NIC_TIMESTAMPS=True, SmartNIC=True, FPGA=100),
        hw("16Cores_highFPGA", "compute_schema", "16-core server, FPGA SmartNIC", cost=900, cores=16,
           NIC_Reorder_Buffer=64, NIC_TIMESTAMPS=True, SmartNIC=True, FPGA=100),
        hw("Xeon96_CX5", "compute_schema", "96-core Xeon, CX5 NIC", cost=6000, cores=96, RDMA=True,
           NIC_Reorder_Buffer=20, NIC_TIMESTAMPS=True),
        hw("Xeon96_FPGA", "compute_schema", "96-core Xeon, FPGA SmartNIC", cost=7000, cores=96,
           NIC_Reorder_Buffer=64, NIC_TIMESTAMPS=True, SmartNIC=True, FPGA=100),
        hw("Xeon128_FPGA", "compute_schema", "128-core Xeon, FPGA SmartNIC", cost=9000, cores=128,
           NIC_Reorder_Buffer=64, NIC_TIMESTAMPS=True, SmartNIC=True, FPGA=100),
        hw("TofinoV1Switch", "switch_schema", "Tofino1 ToR, 2 pipelines", cost=5000, programmable=True,
           ECN=True, PFC=True, QOS_Levels=8),
        hw("TofinoV2Switch", "switch_schema", "Tofino2 ToR", cost=8000, programmable=True, ECN=True,
           PFC=True, QOS_Levels=16),
        hw("FixedSwitch_PFC", "switch_schema", "fixed-function ToR with PFC", cost=2000, ECN=True,
           PFC=True, QOS_Levels=8),
        hw("BasicSwitch", "switch_schema", "fixed-function ToR", cost=800, ECN=True, QOS_Levels=4),
        hw("TofinoV1Router", "router_schema", "Tofino1 aggregation router", cost=6000, programmable=True),
        hw("FixedRouter", "router_schema", "fixed-function aggregation router", cost=3000),
        hw("80GLink", "link_schema", "80Gbps server-ToR cable", cost=50, link_speed=80),
        hw("100GLink", "link_schema", "100Gbps Ethernet server-ToR cable", cost=80, link_speed=100),
        hw("200GLink", "link_schema", "200Gbps server-ToR cable", cost=150, link_speed=200),
    ]

    objectives = [
        {"id": "latency"},
        {"id": "throughput"},
        {"id": "ease_of_deployment"},
        {"id": "monitoring", "granularities": ["capture_delays", "detect_queue_length"]},
        {"id": "load_balancing"},
        {"id": "fairness", "granularities": ["per-flow", "per-application", "per-tenant"]},
        {"id": "application_modification"},
        {"id": "isolation"},
        {"id": "security"},
        {"id": "fault_tolerance"},
    ]

    dc = has("dc_flows")
    roles = [
        role("cca", dc),
        role("transport", dc),
        role("load_balancer", dc),
        role("Monitor", dc),
        role("virtual_switch", dc),
        role("cpu_sched", has("long_flows")),
        role("network_stack", any_of(has("short_flows"), has("ml_inference"))),
        role("WAN_DC_Competition", all_of(has("wan_flows"), coloc("dc_flows")),
             warning="WAN-DC competition can cause high latency"),
    ]

    no_rdma = label(neg(dep("RDMA")), "runs over a host TCP stack, not RDMA")
    tcp_cca = ["latency", "throughput", "fairness.per-flow"]
    systems = [
        # congestion control
        system("DCQCN", ["cca"], ["latency", "throughput"],
               every_switch("PFC", "DCQCN requires PFC on every switch"),
               label(forall("SWITCH", "s", alloc("QOS_Levels", num(1), "PER_DEVICE", var="s")),
                     "DCQCN reserves one QoS level on every switch")),
        system("BFC", ["cca"], ["latency", "throughput"],
               every_switch("programmable", "BFC requires programmable switches"),
               label(forall("LINK", "l", cmp("le", attr("l", "link_speed"), num(100))),
                     "BFC is only supported on links up to 100Gbps"),
               label(neg(dep("RDMA")), "BFC backpressure is not combined with RDMA")),
        system("Timely", ["cca"], ["latency"],
               every_compute("NIC_TIMESTAMPS", "Timely requires NIC timestamps"),
               label(alloc("QOS_Levels", num(1), "PER_SYSTEM_GLOBAL", device_type="SWITCH"),
                     "Timely uses one dedicated QoS level regardless of how many hosts deploy it")),
        system("Swift", ["cca"], ["latency", "throughput"],
               every_compute("NIC_TIMESTAMPS", "Swift requires NIC timestamps"), no_rdma),
        system("Homa", ["cca"], ["latency"],
               label(forall("SWITCH", "s", cmp("ge", attr("s", "QOS_Levels"), num(8))),
                     "Homa needs at least 8 switch priority levels"), no_rdma),
        system("DCTCP", ["cca"], tcp_cca, every_switch("ECN", "DCTCP requires ECN marking on switches"), no_rdma),
        system("Cubic", ["cca"], ["throughput"], no_rdma),
        system("BBR", ["cca"], ["throughput"], no_rdma),
        system("Vegas", ["cca"], ["latency"], no_rdma),
        system("Copa", ["cca"], ["latency"], no_rdma),
        system("LEDBAT", ["cca"], ["fairness"], no_rdma),

        # transport
        system("RDMA", ["transport"], ["latency", "throughput"],
               every_compute("RDMA", "RDMA requires an RDMA-capable NIC on every compute node")),
        system("TCP", ["transport"], ["throughput"], label(lit(True), "TCP runs on any host")),
        system("Pony", ["transport"], ["latency", "throughput"],
               label(dep("Snap"), "Pony Express runs inside the Snap network stack")),

        # network stacks
        system("Linux", ["network_stack"], ["throughput"], label(lit(True), "the default kernel stack")),
        system("Snap", ["network_stack"], ["latency", "throughput"],
               label(forall("COMPUTE", "c", alloc("cores", num(1), "PER_DEVICE", var="c")),
                     "Snap burns one core per server for scheduling")),
        system("NetChannel", ["network_stack"], ["latency", "throughput"],
               label(forall("COMPUTE", "c", alloc("cores", num(1), "PER_DEVICE", var="c")),
                     "NetChannel dedicates one core per server to its data path")),
        system("Demikernel", ["network_stack"], ["latency"],
               every_compute("RDMA", "the Demikernel RDMA stack needs RDMA-capable NICs")),

        # load balancing
        system("ECMP", ["load_balancer"], ["load_balancing"], label(lit(True), "ECMP is built into every switch")),
        system("PLB", ["load_balancer"], ["load_balancing"],
               every_switch("ECN", "PLB reacts to ECN marks from switches"),
               label(forall("COMPUTE", "c", alloc("cores", num(1), "PER_DEVICE", var="c")),
                     "PLB uses one host core per server")),
        system("CONGA", ["load_balancer"], ["load_balancing", "throughput"],
               every_switch("programmable", "CONGA requires programmable switches")),
        system("PacketSpray", ["load_balancer"], ["load_balancing", "throughput", "latency"],
               label(forall("COMPUTE", "c", cmp("gt", attr("c", "NIC_Reorder_Buffer"), num(20))),
                     "PacketSpray requires NIC_Reorder_Buffer > 20 on every compute node")),

        # monitoring
        system("PingMesh", ["Monitor"], ["monitoring.capture_delays"],
               label(forall("COMPUTE", "c",
                            alloc("cores", mul(num(8e-05), count("COMPUTE")), "PER_DEVICE", var="c")),
                     "PingMesh probes cost CPU proportional to the number of servers")),
        system("Simon", ["Monitor"], ["monitoring.capture_delays", "monitoring.detect_queue_length"],
               every_compute("NIC_TIMESTAMPS", "Simon requires NIC timestamps on every compute node"),
               label(alloc("cores", mul(num(0.1), scalar("num_flows")), "PER_WORKLOAD_GLOBAL",
                           device_type="COMPUTE"),
                     "Simon needs CPU proportional to the number of flows"),
               warnings=[{"when": cmp("gt", scalar("network_load"), num(40)),
                          "text": "Simon does not have benchmarks beyond 40Gbps link speeds and it is being "
                                  "deployed for that case"}]),
        system("Sonata", ["Monitor"], ["monitoring.capture_delays", "monitoring.detect_queue_length"],
               every_switch("programmable", "Sonata requires programmable switches")),
        system("Marple", ["Monitor"], ["monitoring.capture_delays", "monitoring.detect_queue_length"],
               every_switch("programmable", "Marple requires programmable switches")),

        # virtual switching
        system("ANDROMEDA", ["virtual_switch"], ["isolation"],
               label(alloc("cores", mul(num(2), count("COMPUTE")), "PER_WORKLOAD_GLOBAL", device_type="COMPUTE"),
                     "Andromeda needs two host cores per server of the workload")),
        system("VFP", ["virtual_switch"], ["isolation"],
               every_compute("SmartNIC", "VFP offloads to a SmartNIC"),
               label(forall("COMPUTE", "c", alloc("FPGA", num(40), "PER_DEVICE", var="c")),
                     "VFP occupies 40 units of NIC FPGA capacity")),
        system("Nitro", ["virtual_switch"], ["isolation", "security"],
               every_compute("SmartNIC", "Nitro requires offload cards on every server"),
               label(forall("COMPUTE", "c", alloc("FPGA", num(60), "PER_DEVICE", var="c")),
                     "Nitro occupies 60 units of NIC FPGA capacity")),

        # CPU scheduling
        system("ZygOS", ["cpu_sched"], ["latency"],
               label(forall("COMPUTE", "c", alloc("cores", num(1), "PER_DEVICE", var="c")),
                     "ZygOS dedicates one core per server to work stealing")),
    ]

    incast = has("incast")
    calm = neg(has("incast"))
    L, T, E, M, LB = "latency", "throughput", "ease_of_deployment", "monitoring", "load_balancing"
    orderings = [
        # load balancers
        better(LB, "PacketSpray", "CONGA"), same(LB, "CONGA", "PLB"), better(LB, "PLB", "ECMP"),
        better(L, "PacketSpray", "CONGA"), better(L, "CONGA", "ECMP"), same(L, "CONGA", "PLB"),
        better(E, "PLB", "CONGA"), better(E, "ECMP", "CONGA"), better(E, "PacketSpray", "CONGA"),
        better(E, "ECMP", "PacketSpray"),
        better(T, "PacketSpray", "CONGA"), same(T, "CONGA", "PLB"), better(T, "PLB", "ECMP"),

        # congestion control; the lossless fabric's advantage depends on incast
        better(L, "BFC", "Swift", calm), better(L, "Swift", "DCQCN", calm), better(L, "DCQCN", "Timely", calm),
        same(L, "BFC", "DCQCN", incast), better(L, "DCQCN", "Swift", incast),
        same(L, "Homa", "Swift"), better(L, "Swift", "Timely"), better(L, "Timely", "DCTCP"),
        better(L, "DCTCP", "BBR"), better(L, "DCTCP", "Copa"), better(L, "DCTCP", "Vegas"),
        better(L, "BBR", "Cubic"), better(L, "Copa", "Cubic"), better(L, "Vegas", "Cubic"),
        better(L, "Cubic", "LEDBAT"),
        better(T, "BFC", "DCQCN"), better(T, "Swift", "Homa"), better(T, "DCQCN", "DCTCP"),
        better(T, "BBR", "Cubic"), better(T, "Cubic", "LEDBAT"),
        better(E, "Cubic", "DCQCN"), better(E, "DCTCP", "BFC"), better(E, "Swift", "BFC"),

        # transports
        better(L, "RDMA", "Pony"), better(L, "Pony", "TCP"),
        better(T, "RDMA", "TCP"), same(T, "TCP", "Pony"),
        better(E, "TCP", "RDMA"), better(E, "TCP", "Pony"),

        # network stacks
        better(L, "NetChannel", "Snap"), better(L, "Snap", "Linux"), same(L, "Demikernel", "NetChannel"),
        better(T, "NetChannel", "Snap"), better(T, "Snap", "Linux"), better(T, "NetChannel", "Demikernel"),
        better(E, "Linux", "Snap"), better(E, "Linux", "NetChannel"), better(E, "Linux", "Demikernel"),

        # monitors
        better(M, "Simon", "PingMesh"), better(M, "Sonata", "Simon"), same(M, "Sonata", "Marple"),
        better(E, "PingMesh", "Simon"), better(E, "Sonata", "Marple"),
        better(T, "Sonata", "Marple"), better(T, "Marple", "Simon"), better(T, "Marple", "PingMesh"),

        # virtual switches
        same(L, "ANDROMEDA", "VFP"), same(L, "ANDROMEDA", "Nitro"),
        same(T, "ANDROMEDA", "VFP"), same(T, "ANDROMEDA", "Nitro"),
        better(E, "ANDROMEDA", "VFP"), better(E, "ANDROMEDA", "Nitro"),
    ]

    return {
        "kepler-spec": 1,
        "provenance": "datacenter catalog; numeric hardware values and unstated orderings are authored",
        "schemas": schemas,
        "hardware": hardware,
        "objectives": objectives,
        "roles": roles,
        "systems": systems,
        "orderings": orderings,
    }


# --- topologies and DC queries ---------------------------------------------

def pod(pid, racks, computes):
    children = []
    for r in range(racks):
        rid = f"{pid}-r{r}"
        devices = [{"id": f"{rid}-tor", "device_type": "SWITCH", "schema": "switch_schema"}]
        for c in range(computes):
            devices.append({"id": f"{rid}-c{c}", "device_type": "COMPUTE", "schema": "compute_schema"})
            devices.append({"id": f"{rid}-l{c}", "device_type": "LINK", "schema": "link_schema"})
        children.append({"id": rid, "group_type": "RACK", "devices": devices})
    return {"groups": [{
        "id": pid, "group_type": "POD",
        "devices": [{"id": f"{pid}-router", "device_type": "ROUTER", "schema": "router_schema"}],
        "children": children,
    }]}


def optimize(workload, objective, priority):
    return {"workload": workload, "objective": objective, "priority": priority}


def ml_training_query(properties=("dc_flows", "long_flows", "incast")):
    return {
        "kepler-spec": 1,
        "topology": pod("pod1", 2, 7),
        "workloads": [{
            "id": "ML_Training",
            "deployed_at": ["pod1-r0"],
            "properties": list(properties),
            "objectives": ["latency", "throughput", "ease_of_deployment", "monitoring", "load_balancing"],
            "scalars": {"network_load": 9},
            "performance_bounds": [{"objective": "load_balancing", "at_least": "PLB"}],
        }],
        "optimize": [
            optimize("ML_Training", "latency", 1),
            optimize("ML_Training", "throughput", 2),
            optimize("ML_Training", "ease_of_deployment", 3),
        ],
    }


def inference_query(excluded=()):
    return {
        "kepler-spec": 1,
        "topology": pod("pod1", 3, 10),
        "workloads": [{
            "id": "Inference",
            "deployed_at": ["pod1-r0", "pod1-r1", "pod1-r2"],
            "properties": ["dc_flows", "short_flows", "high_priority", "ml_inference"],
            "objectives": ["latency", "throughput", "monitoring", "load_balancing"],
            "scalars": {"peak_cores": 2800, "peak_bandwidth": 30, "average_cores": 800,
                        "average_bandwidth": 10, "num_flows": 10},
            "performance_bounds": [
                {"objective": "load_balancing", "at_least": "PacketSpray"},
                {"objective": "monitoring", "solves": "monitoring.detect_queue_length"},
            ],
            "exempted_roles": ["virtual_switch"],
        }],
        "optimize": [
            optimize("Inference", "latency", 1),
            optimize("Inference", "throughput", 2),
            {"metric": "TOTAL_COST", "priority": 3},
            optimize("Inference", "monitoring", 4),
        ],
        "excluded_hardware": list(excluded),
    }


# --- cloud-native catalog ---------------------------------------------------

def cloud_catalog():
    ms = has("microservices")
    roles = [role(r, ms) for r in ["runtime", "orchestrator", "autoscaler", "mesh", "rpc"]]

    def sysd(sid, r, solves, *cs):
        return system(sid, [r], solves, *cs)

    any_host = lambda text: label(lit(True), text)  # noqa: E731
    systems = [
        sysd("containerd", "runtime", ["ease_of_deployment"], any_host("CRI runtime supported natively by Kubernetes")),
        sysd("CRI-O", "runtime", ["latency"], any_host("CRI runtime supported natively by Kubernetes")),
        sysd("Docker", "runtime", ["ease_of_deployment"],
             label(any_of(neg(dep("Kubernetes")), dep("containerd")),
                   "Kubernetes dropped direct Docker integration; it needs a CRI shim")),
        sysd("Kubernetes", "orchestrator", ["fault_tolerance"], any_host("runs on any Linux node")),
        sysd("Knative", "orchestrator", ["ease_of_deployment"],
             label(neg(has("stateful")), "Knative targets stateless request-driven services")),
        sysd("DockerSwarm", "orchestrator", ["ease_of_deployment"],
             label(dep("Docker"), "Docker Swarm requires the Docker engine")),
        sysd("HPA", "autoscaler", ["ease_of_deployment"],
             label(dep("Kubernetes"), "HPA is part of Kubernetes")),
        sysd("KEDA", "autoscaler", ["latency"],
             label(dep("Kubernetes"), "KEDA extends the Kubernetes autoscaler")),
        sysd("Istio-sidecar", "mesh", ["security"], label(dep("Kubernetes"), "Istio requires Kubernetes")),
        sysd("Istio-ambient", "mesh", ["latency", "security"],
             label(dep("Kubernetes"), "Istio requires Kubernetes")),
        sysd("Linkerd", "mesh", ["latency", "ease_of_deployment"],
             label(dep("Kubernetes"), "Linkerd requires Kubernetes")),
        sysd("Cilium", "mesh", ["latency", "security"],
             label(forall("NODE", "n", attr("n", "eBPF")), "Cilium requires eBPF support on every node")),
        sysd("gRPC", "rpc", ["latency"], any_host("language-neutral RPC library")),
        sysd("Thrift", "rpc", ["latency"], any_host("language-neutral RPC library")),
    ]
    L, E = "latency", "ease_of_deployment"
    orderings = [
        better(E, "containerd", "Docker"), better(E, "containerd", "CRI-O"),
        same(L, "containerd", "CRI-O"), better(L, "containerd", "Docker"),
        better(E, "Kubernetes", "Knative"), better(E, "Kubernetes", "DockerSwarm"),
        same(L, "Kubernetes", "DockerSwarm"), better(L, "Kubernetes", "Knative"),
        better(E, "HPA", "KEDA"), same(L, "HPA", "KEDA"),
        better(E, "Linkerd", "Istio-ambient"), better(E, "Linkerd", "Istio-sidecar"), better(E, "Linkerd", "Cilium"),
        better(L, "Istio-ambient", "Linkerd"), better(L, "Linkerd", "Istio-sidecar"), same(L, "Cilium", "Linkerd"),
        better(E, "gRPC", "Thrift"), same(L, "gRPC", "Thrift"),
    ]
    return {
        "kepler-spec": 1,
        "provenance": "cloud-native catalog; orderings are authored",
        "schemas": [{"id": "node_schema", "device_type": "NODE", "entries": {
            "cost": {"kind": "REAL"},
            "cores": {"kind": "EXHAUSTIBLE"},
            "eBPF": {"kind": "BOOL", "default": False},
        }}],
        "hardware": [
            {"id": "c220g1", "schema": "node_schema", "values": {"cost": 0, "cores": 16, "eBPF": True},
             "provenance": AUTHORED, "description": "16-core Intel E5-2630 node"},
        ],
        "objectives": [{"id": "latency"}, {"id": "ease_of_deployment"}, {"id": "security"},
                       {"id": "fault_tolerance"}],
        "roles": roles,
        "systems": systems,
        "orderings": orderings,
    }


def cloud_query(first, second):
    nodes = [{"id": f"node{i}", "device_type": "NODE", "schema": "node_schema"} for i in range(10)]
    return {
        "kepler-spec": 1,
        "topology": {"groups": [{"id": "cluster", "group_type": "CLUSTER", "devices": nodes}]},
        "workloads": [{
            "id": "HotelReservation",
            "deployed_at": ["cluster"],
            "properties": ["microservices"],
            "objectives": ["latency", "ease_of_deployment"],
        }],
        "optimize": [optimize("HotelReservation", first, 1), optimize("HotelReservation", second, 2)],
    }


def write(name, doc):
    with open(os.path.join(OUT, name), "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def main():
    os.makedirs(OUT, exist_ok=True)
    write("catalog_dc.json", dc_catalog())
    write("catalog_cloud.json", cloud_catalog())
    write("query_ml_training.json", ml_training_query())
    write("query_inference.json", inference_query())
    write("query_inference_no_programmable.json",
          inference_query(["TofinoV1Router", "TofinoV1Switch", "TofinoV2Switch"]))
    write("query_cloud_eod.json", cloud_query("ease_of_deployment", "latency"))
    write("query_cloud_latency.json", cloud_query("latency", "ease_of_deployment"))


if __name__ == "__main__":
    main()
