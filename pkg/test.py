from spg_scls import *

with tools.Stopwatch() as gen_time:
    data = generate(GenSpec(m=200, n=100, seed=1, scenario=Scenario.SEVERE))
    prob = compile_problem(data)

cfg = SolverConfig(rho=5.0)

admm_report = solve(prob, cfg, prepare(prob, cfg.rho, FactorPath.DENSE))
cd_report = solve_cd_admm(prob, cfg)
oracle = solve_trs(prob)

print(f"instance: m={data.m} n={data.n} ({gen_time.elapsed:.3f}s)")
for name, report in (("admm", admm_report), ("cd-admm", cd_report)):
    print(f" * {name:8} f={report.objective:.12g} iters={report.iterations} converged={report.converged} "
          f"factorizations={report.factorizations} time={report.solve_time:.3f}s")
print(f" * {'oracle':8} f={oracle.objective:.12g} lam={oracle.multiplier:.6g} hard_case={oracle.hard_case}")

lam = check_kkt(prob, cd_report.s_star, 1e-6)
print(f"certified: lam={lam:.6g}, rel. error {tools.rel_err(cd_report.objective, oracle.objective):.2e}")

point = recover(prob, cd_report.s_star)
print(f"alpha={point.alpha:.6g} leader objective={leader_objective(data, point.w):.12g}")
