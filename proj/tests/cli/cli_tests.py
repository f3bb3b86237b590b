"""End-to-end checks of the darkspin executable. Usage: cli_tests.py <darkspin> <root> <case>"""
import csv
import json
import os
import subprocess
import sys
import tempfile

import jsonschema

EXE, ROOT, CASE = sys.argv[1], sys.argv[2], sys.argv[3]
DATA = os.path.join(ROOT, "tests", "data")
SCHEMAS = os.path.join(ROOT, "schemas")


def run(args, out, expect=0, env=None):
    cmd = [EXE] + (["-o", out] if out else []) + args
    p = subprocess.run(cmd, capture_output=True, text=True, env=env)
    if p.returncode != expect:
        raise AssertionError(f"{cmd}: exit {p.returncode}, wanted {expect}\n{p.stdout}{p.stderr}")
    return p


def result(out):
    with open(os.path.join(out, "result.json")) as f:
        doc = json.load(f)
    with open(os.path.join(SCHEMAS, f"{doc['subcommand']}.schema.json")) as f:
        jsonschema.validate(doc, json.load(f))
    return doc["result"]


def rows(path):
    with open(path) as f:
        r = list(csv.reader(line for line in f if not line.startswith("#")))
    return r[0], [[float(v) for v in row] for row in r[1:]]


def param(res, name):
    return next(p for p in res["parameters"] if p["name"] == name)


def close(a, b, rel):
    assert abs(a - b) <= rel * abs(b), f"{a} vs {b} (rel {rel})"


def case_roundtrip(tmp):
    sim = os.path.join(tmp, "sim")
    run(["simulate-fid", "--sigma", "2000", "--gamma", "0.2", "--depth", "5", "--t-min", "0.2", "--t-max", "10",
         "--points", "24"], sim)
    result(sim)
    fit = os.path.join(tmp, "fit")
    run(["fit-fid", "-i", os.path.join(sim, "curve.csv"), "--grid", "10"], fit)
    res = result(fit)
    assert res["converged"]
    for name, truth in (("sigma", 2000.0), ("gamma", 0.2), ("d", 5.0)):
        p = param(res, name)
        assert abs(p["value"] - truth) <= max(3 * p["gn_error"], 1e-3 * truth), (name, p)
    header, data = rows(os.path.join(fit, "fit_curve.csv"))
    assert header == ["t_us", "signal", "model"]
    assert max(abs(r[1] - r[2]) for r in data) < 1e-4


def case_zero_sigma(tmp):
    run(["simulate-fid", "--sigma", "0", "--points", "12"], tmp)
    header, data = rows(os.path.join(tmp, "curve.csv"))
    assert header == ["t_us", "signal"] and len(data) == 12
    assert all(r[1] == 1.0 for r in data)
    assert result(tmp)["min_signal"] == 1.0


def case_oracle(tmp):
    run(["oracle"], tmp)
    res = result(tmp)
    assert res["pass"] and res["overdamped_points"] > 0
    assert max(res["max_abs_deer"], res["max_abs_echo"], res["max_abs_diff"]) < 1e-6
    _, data = rows(os.path.join(tmp, "residuals.csv"))
    assert len(data) == 200


def case_nan_row(tmp):
    p = run(["fit-fid", "-i", os.path.join(DATA, "nan.csv")], tmp, expect=2)
    assert "nan.csv:3" in p.stderr, p.stderr


def case_duplicate_time(tmp):
    p = run(["fit-fid", "-i", os.path.join(DATA, "duplicate.csv")], tmp, expect=2)
    assert "duplicate.csv:3" in p.stderr, p.stderr


def case_unit_mismatch(tmp):
    p = run(["fit-fid", "-i", os.path.join(DATA, "fid_clean.csv"), "--time-unit", "ns"], tmp, expect=2)
    assert "unit mismatch" in p.stderr


def case_ns_input(tmp):
    src = os.path.join(DATA, "fid_clean.csv")
    ns = os.path.join(tmp, "ns.csv")
    _, data = rows(src)
    with open(ns, "w") as f:
        f.write("t_ns,signal\n")
        for r in data:
            f.write(f"{r[0] * 1000!r},{r[1]!r}\n")
    run(["fit-fid", "-i", ns, "--time-unit", "ns", "--grid", "8"], os.path.join(tmp, "a"))
    run(["fit-fid", "-i", src, "--grid", "8"], os.path.join(tmp, "b"))
    a, b = result(os.path.join(tmp, "a")), result(os.path.join(tmp, "b"))
    for name in ("sigma", "gamma", "d"):
        close(param(a, name)["value"], param(b, name)["value"], 1e-9)


def case_bad_args(tmp):
    run(["p1", "--bogus"], tmp, expect=2)
    run([], tmp, expect=2)
    run(["simulate-fid", "--sigma", "-5"], tmp, expect=2)
    run(["nn", "--profile", "cube"], tmp, expect=2)


def case_env_out(tmp):
    env = dict(os.environ, DARKSPIN_OUT=os.path.join(tmp, "from_env"))
    run(["p1"], None, env=env)
    assert os.path.exists(os.path.join(tmp, "from_env", "result.json"))


def case_determinism(tmp):
    jobs = [
        ["simulate-fid", "--sigma", "800", "--gamma", "0.1", "--depth", "5", "--t-max", "5", "--points", "8",
         "--mc", "300", "--noise", "0.01"],
        ["nn", "--n-max", "2", "--mc", "3000"],
        ["oracle", "--points", "50"],
    ]
    for i, job in enumerate(jobs):
        outs = [os.path.join(tmp, f"{i}_{k}") for k in range(2)]
        for o in outs:
            run(job, o)
        for name in os.listdir(outs[0]):
            if name == "metadata.json":
                continue
            with open(os.path.join(outs[0], name), "rb") as f0, open(os.path.join(outs[1], name), "rb") as f1:
                assert f0.read() == f1.read(), (job[0], name)
        other = os.path.join(tmp, f"{i}_seed")
        run(["--seed", "7"] + job, other)
        assert result(outs[0]) != result(other), job[0]


def case_fit_decay(tmp):
    run(["fit-decay", "--model", "t1-nv", "-i", os.path.join(DATA, "t1_nv.csv")], os.path.join(tmp, "a"))
    res = result(os.path.join(tmp, "a"))
    close(param(res, "T1_nv")["value"], 800.0, 1e-6)
    close(param(res, "n_nv")["value"], 0.9, 1e-6)
    run(["fit-decay", "--model", "t1", "-i", os.path.join(DATA, "t1_coated.csv"), "--nv-input",
         os.path.join(DATA, "t1_nv.csv")], os.path.join(tmp, "b"))
    res = result(os.path.join(tmp, "b"))
    close(param(res, "T1_e")["value"], 150.0, 1e-6)
    close(param(res, "n_e")["value"], 0.6, 1e-6)
    assert "stage_one" in res
    run(["fit-decay", "--model", "lorentzian", "-i", os.path.join(DATA, "odmr.csv"), "--peaks", "3"],
        os.path.join(tmp, "c"))
    res = result(os.path.join(tmp, "c"))
    centers = sorted(param(res, f"center_{k}")["value"] for k in (1, 2, 3))
    for c, truth in zip(centers, (441.6, 561.2, 668.7)):
        close(c, truth, 1e-7)
    run(["fit-decay", "--model", "t1", "-i", os.path.join(DATA, "odmr.csv")], os.path.join(tmp, "d"), expect=2)


def case_gfactor(tmp):
    run(["gfactor", "-i", os.path.join(DATA, "gfactor_14n.json")], os.path.join(tmp, "a"))
    res = result(os.path.join(tmp, "a"))
    close(res["omega_e_avg_mhz"], 551.9, 1e-6)
    assert abs(res["b_eff_gauss"] - 196.9) < 0.1
    assert abs(res["g"] - 2.0067) < 1e-4
    run(["gfactor", "-i", os.path.join(DATA, "gfactor_15n.json")], os.path.join(tmp, "b"))
    res = result(os.path.join(tmp, "b"))
    assert abs(res["g"] - 1.9966) < 1e-4
    assert len(res["roots_mhz"]) == 2


def case_p1(tmp):
    run(["p1", "--omega-e", "549.1"], tmp)
    res = result(tmp)
    on = {l["m_i"]: l["perturbative_mhz"] for l in res["lines"] if l["axis"] == "on"}
    close(on[1] + on[-1] - on[0], 549.1, 1e-12)
    close(res["off_axis_constants"]["a_par_mhz"], (113.55 + 8 * 81.4875) / 9, 1e-12)


def case_nn(tmp):
    run(["nn", "--dose", "3e9", "--dose-unit", "cm2"], tmp)
    res = result(tmp)["neighbours"][0]
    close(res["mean_nm"], 91.37, 0.01)
    close(res["std_nm"], 47.60, 0.02)


def case_sensitivity(tmp):
    run(["sensitivity", "--depths", "4", "5", "--sigmas", "100", "1000", "10000"], tmp)
    res = result(tmp)
    assert res["ratio_one_contour"]
    assert res["ratio_orientation"].startswith("eta_coated/eta_bare")
    t = res["time_to_snr"]
    close(t["formula_hours_scaled"], t["formula_hours"] / 10, 1e-12)
    assert t["quoted_hours"] == 2.3 and t["quoted_hours_scaled"] == 0.25
    header, data = rows(os.path.join(tmp, "ratio_map.csv"))
    assert header[:3] == ["d_nv_nm", "sigma_T_um2", "eta_ratio"]
    for d, s, ratio, *_ in data:
        assert (ratio < 1) == (s <= 100) or s == 1000, (d, s, ratio)


def case_nucleation(tmp):
    run(["nucleation", "-i", os.path.join(DATA, "nucleation.csv")], os.path.join(tmp, "a"))
    res = result(os.path.join(tmp, "a"))
    close(param(res, "n_d")["value"], 0.047, 1e-4)
    close(param(res, "g")["value"], 0.04667, 1e-4)
    close(res["coalescence"]["r_cov_nm"], 2.60, 0.01)
    run(["nucleation", "--n-d", "0.047", "--g", "0.04667", "--points", "5"], os.path.join(tmp, "b"))
    _, data = rows(os.path.join(tmp, "b", "model_curve.csv"))
    assert len(data) == 5 and data[0][1] == 0.0
    run(["nucleation"], os.path.join(tmp, "c"), expect=2)


def case_defaults_override(tmp):
    with open(os.path.join(ROOT, "share", "defaults.json")) as f:
        d = json.load(f)
    d["oracle"]["points"] = 20
    path = os.path.join(tmp, "d.json")
    with open(path, "w") as f:
        json.dump(d, f)
    run(["--defaults", path, "oracle"], os.path.join(tmp, "a"))
    _, data = rows(os.path.join(tmp, "a", "residuals.csv"))
    assert len(data) == 20
    d["constants"]["gamma_electron_linear_mhz_per_gauss"] = 2.8
    with open(path, "w") as f:
        json.dump(d, f)
    run(["--defaults", path, "oracle"], os.path.join(tmp, "b"), expect=2)


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        globals()["case_" + CASE](tmp)
    print(f"{CASE}: ok")
