"""Plot-ready CSV bundles built from result records.

* ``vev_vs_g0.csv``: vacuum field expectation against g0 with the
  classical value sqrt(-6 mu^2 / lambda0)
* ``kink_profile.csv``: per-site <phi_x>, <phi_x^2> of the kink state for each chi
* ``masses_vs_g0.csv``: M_K, m_S and 2 M_K with classical, one-loop and tree references
* ``ratio_vs_g0.csv``: m_S / (2 M_K)
"""
import csv
import os

FILES = {
    "vev_vs_g0.csv": ("point", "g0", "mu0_sq", "lambda0", "chi", "d", "L", "vev", "classical_v"),
    "kink_profile.csv": ("point", "chi", "x", "phi", "phi_sq"),
    "masses_vs_g0.csv": ("point", "g0", "mu0_sq", "lambda0", "chi", "M_K", "m_S", "two_M_K",
                         "m_S_bessel", "m_S_bessel_sq", "classical_MK", "dhn_MK", "tree_mS"),
    "ratio_vs_g0.csv": ("point", "g0", "mu0_sq", "lambda0", "chi", "ratio_mS_2MK"),
}


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "" if v != v else format(v, ".12g")
    try:
        f = float(v)
    except (TypeError, ValueError):
        return str(v)
    return "" if f != f else format(f, ".12g")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def figure_data(records, profiles, outdir, ratio_ansatz="bessel_sq"):
    """Write the four figure CSVs; returns ``{file: [points lacking inputs]}``.

    ``profiles`` maps point id to ``{"phi": array, "phi_sq": array}``.
    A point missing an input still gets a row (with empty cells) so that
    single-point runs produce one-row files.
    """
    missing = {name: [] for name in FILES}
    m_s_col = "m_S_bessel_sq" if ratio_ansatz == "bessel_sq" else "m_S_bessel"
    vev, masses, ratio, prof = [], [], [], []
    for rec in records:
        pid = rec["point"]
        vev.append([pid, rec["g0"], rec["mu0_sq"], rec["lambda0"], rec["chi"], rec["d"], rec["L"],
                    rec["phi_abs_mean"], rec["classical_v"]])
        if rec["phi_abs_mean"] is None:
            missing["vev_vs_g0.csv"].append(pid)
        masses.append([pid, rec["g0"], rec["mu0_sq"], rec["lambda0"], rec["chi"], rec["M_K"], rec[m_s_col],
                       rec["two_M_K"], rec["m_S_bessel"], rec["m_S_bessel_sq"], rec["classical_MK"],
                       rec["dhn_MK"], rec["tree_mS"]])
        if rec["M_K"] is None or rec[m_s_col] is None:
            missing["masses_vs_g0.csv"].append(pid)
        ratio.append([pid, rec["g0"], rec["mu0_sq"], rec["lambda0"], rec["chi"], rec["ratio_mS_2MK"]])
        if rec["ratio_mS_2MK"] is None:
            missing["ratio_vs_g0.csv"].append(pid)
        p = profiles.get(pid)
        if p is None:
            missing["kink_profile.csv"].append(pid)
            continue
        for x, (a, b) in enumerate(zip(p["phi"], p["phi_sq"])):
            prof.append([pid, rec["chi"], x, float(a), float(b)])
    os.makedirs(outdir, exist_ok=True)
    write_csv(os.path.join(outdir, "vev_vs_g0.csv"), FILES["vev_vs_g0.csv"], vev)
    write_csv(os.path.join(outdir, "kink_profile.csv"), FILES["kink_profile.csv"], prof)
    write_csv(os.path.join(outdir, "masses_vs_g0.csv"), FILES["masses_vs_g0.csv"], masses)
    write_csv(os.path.join(outdir, "ratio_vs_g0.csv"), FILES["ratio_vs_g0.csv"], ratio)
    return {k: v for k, v in missing.items() if v}
