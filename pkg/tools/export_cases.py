"""Write the bundled IEEE cases as MATPOWER text files.

Source data is the PYPOWER distribution (BSD, a port of MATPOWER's case
files). Usage: python tools/export_cases.py <dir containing pypower/> cases/
"""
import importlib.util
import sys
from pathlib import Path

CASES = {
    "case9": "case9",
    "case24": "case24_ieee_rts",
    "case39": "case39",
    "case57": "case57",
    "case118": "case118",
}

BUS_HDR = "bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin"
GEN_HDR = "bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin"
BRANCH_HDR = "fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax"


def _fmt(v):
    f = float(v)
    if f == int(f) and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def _block(name, rows, ncol, header):
    out = [f"%% {header}", f"mpc.{name} = ["]
    for row in rows:
        out.append("\t" + "\t".join(_fmt(v) for v in row[:ncol]) + ";")
    out.append("];")
    return out


def export(src_root, dest, out_name, module):
    path = Path(src_root) / "pypower" / f"{module}.py"
    spec = importlib.util.spec_from_file_location(module, path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    ppc = getattr(mod, module)()
    lines = [
        f"function mpc = {out_name}",
        f"%{out_name.upper()}  Power flow data (exported from PYPOWER {module}).",
        "",
        "mpc.version = '2';",
        "",
        "%% system MVA base",
        f"mpc.baseMVA = {_fmt(ppc['baseMVA'])};",
        "",
    ]
    lines += _block("bus", ppc["bus"], 13, BUS_HDR) + [""]
    lines += _block("gen", ppc["gen"], 10, GEN_HDR) + [""]
    lines += _block("branch", ppc["branch"], 13, BRANCH_HDR)
    (Path(dest) / f"{out_name}.m").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    src_root, dest = sys.argv[1], sys.argv[2]
    for out_name, module in CASES.items():
        export(src_root, dest, out_name, module)
