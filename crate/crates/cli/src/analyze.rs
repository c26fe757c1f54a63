use std::fs;

use aloe_core::analysis::plot::{bar_chart_svg, heatmap_svg, scatter_svg};
use aloe_core::analysis::{
    any_link, appraisal_distribution, classify_observers, conditional_alignment_matrix, experience_comparison,
    flair_level_groups, group_conditional_rate, group_mean_alignment, labels_differ, matched_same_appraisal_diff,
    observer_gives_advice, pca_project, profession_counts, profession_groups, profession_regression, write_tsv, FlairTable,
    GroupDistribution, GroupMean, MeanUnit, Profession, RateTable, RecordProfile, Variance,
};
use aloe_core::data::{AppraisalLabel, Role};
use aloe_core::pipeline::{read_records, AlignmentRecord};
use anyhow::{Context, Result};

use crate::data::read_list;
use crate::{AnalyzeArgs, AnalyzeCommand, Side, TestKind, Unit};

struct Input {
    records: Vec<AlignmentRecord>,
    out: std::path::PathBuf,
    table: FlairTable,
}

impl Input {
    fn load(args: &AnalyzeArgs) -> Result<Self> {
        let records = read_records(&args.records)?;
        fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
        let table = match &args.flair_table {
            Some(p) => FlairTable::load(p)?,
            None => FlairTable::builtin(),
        };
        log::info!("{} records", records.len());
        Ok(Input { records, out: args.out.clone(), table })
    }

    fn profiles(&self) -> Vec<RecordProfile> {
        classify_observers(&self.records, &self.table)
    }

    fn tsv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        write_tsv(&self.out.join(name), header, rows)?;
        log::info!("wrote {}", self.out.join(name).display());
        Ok(())
    }

    fn svg(&self, name: &str, body: String) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn mean_row(g: &GroupMean) -> Vec<String> {
    vec![g.group.clone(), f(g.mean), f(g.se), g.n.to_string()]
}

const MEAN_HEADER: [&str; 4] = ["group", "mean", "se", "n"];

fn unit(u: Unit) -> MeanUnit {
    match u {
        Unit::Comment => MeanUnit::Comment,
        Unit::Author => MeanUnit::Author,
    }
}

fn distributions(input: &Input, side: Side) -> Vec<GroupDistribution> {
    let role = match side {
        Side::Target => Role::Target,
        Side::Observer => Role::Observer,
    };
    appraisal_distribution(&input.records, role, |r| Some(r.subreddit.clone()))
}

pub fn dispatch(cmd: AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::Distribution { common, side } => distribution(&Input::load(&common)?, side),
        AnalyzeCommand::Pca { common, side } => pca(&Input::load(&common)?, side),
        AnalyzeCommand::Matrix { common, mask_min } => matrix(&Input::load(&common)?, mask_min),
        AnalyzeCommand::Professions { common, unit: u } => professions(&Input::load(&common)?, unit(u)),
        AnalyzeCommand::Regression { common } => regression(&Input::load(&common)?),
        AnalyzeCommand::MatchedDiff { common } => matched_diff(&Input::load(&common)?),
        AnalyzeCommand::Experience { common, test, levels, levels_subreddit, unit: u } => {
            let input = Input::load(&common)?;
            let variance = match test {
                TestKind::Welch => Variance::Welch,
                TestKind::Pooled => Variance::Pooled,
            };
            experience(&input, variance)?;
            match (levels, levels_subreddit) {
                (Some(levels), Some(sub)) => flair_levels(&input, &read_list(&levels)?, &sub, unit(u)),
                _ => Ok(()),
            }
        }
        AnalyzeCommand::Rates { common, k } => rates(&Input::load(&common)?, k),
    }
}

fn distribution(input: &Input, side: Side) -> Result<()> {
    let dists = distributions(input, side);
    let mut header = vec!["group", "total"];
    header.extend(AppraisalLabel::ANALYSIS.iter().map(|l| l.as_str()));
    let rows: Vec<Vec<String>> = dists
        .iter()
        .map(|d| {
            let mut row = vec![d.group_key.clone(), d.total.to_string()];
            row.extend(d.proportions.iter().map(|&p| f(p)));
            row
        })
        .collect();
    input.tsv("distribution.tsv", &header, &rows)
}

fn pca(input: &Input, side: Side) -> Result<()> {
    let dists = distributions(input, side);
    let rows: Vec<Vec<f64>> = dists.iter().map(|d| d.proportions.to_vec()).collect();
    let result = pca_project::<f64>(&rows)?;
    if result.degenerate {
        log::warn!("all groups share one distribution; every point sits at the origin");
    }
    let coords: Vec<Vec<String>> =
        dists.iter().zip(&result.coords).map(|(d, c)| vec![d.group_key.clone(), f(c[0]), f(c[1])]).collect();
    input.tsv("pca.tsv", &["group", "pc1", "pc2"], &coords)?;
    let mut loadings: Vec<Vec<String>> = AppraisalLabel::ANALYSIS
        .iter()
        .enumerate()
        .map(|(i, l)| vec![l.to_string(), f(result.components[0][i]), f(result.components[1][i])])
        .collect();
    loadings.push(vec!["explained_variance".into(), f(result.explained_variance[0]), f(result.explained_variance[1])]);
    input.tsv("pca_components.tsv", &["label", "pc1", "pc2"], &loadings)?;
    let points: Vec<(String, [f64; 2])> = dists.iter().zip(&result.coords).map(|(d, c)| (d.group_key.clone(), *c)).collect();
    input.svg("pca.svg", scatter_svg("Appraisal distribution by subreddit", &points, "PC1", "PC2"))
}

fn matrix(input: &Input, mask_min: u64) -> Result<()> {
    let m = conditional_alignment_matrix(&input.records, mask_min);
    let mut rows = Vec::new();
    for (i, t) in m.rows.iter().enumerate() {
        for (j, o) in m.cols.iter().enumerate() {
            let p = if m.masked[i][j] { String::new() } else { f(m.probabilities[i][j]) };
            rows.push(vec![t.to_string(), o.to_string(), m.support[i][j].to_string(), p, m.masked[i][j].to_string()]);
        }
    }
    input.tsv("matrix.tsv", &["target_label", "observer_label", "support", "probability", "masked"], &rows)?;
    input.svg("matrix.svg", heatmap_svg("p(Observer label | Target label)", &m))
}

fn professions(input: &Input, unit: MeanUnit) -> Result<()> {
    let profiles = input.profiles();
    let (counts, flaired) = profession_counts(&input.records, &profiles);
    let mut rows: Vec<Vec<String>> =
        counts.iter().map(|c| vec![c.profession.to_string(), c.users.to_string(), c.comments.to_string()]).collect();
    rows.push(vec!["flaired_authors".into(), flaired.to_string(), String::new()]);
    input.tsv("professions.tsv", &["profession", "users", "comments"], &rows)?;

    let order: Vec<String> = Profession::ALL.iter().map(|p| p.to_string()).collect();
    let means = group_mean_alignment(&input.records, &profession_groups(&profiles), Some(&order), unit);
    input.tsv("profession_alignment.tsv", &MEAN_HEADER, &means.iter().map(mean_row).collect::<Vec<_>>())?;
    input.svg("profession_alignment.svg", bar_chart_svg("Mean alignment by profession", &means, "percent alignment"))
}

fn regression(input: &Input) -> Result<()> {
    let result = profession_regression(&input.records, &input.profiles())?;
    let rows: Vec<Vec<String>> = result
        .coefficients
        .iter()
        .map(|c| vec![c.term.clone(), f(c.estimate), f(c.std_error), f(c.t), format!("{:.3e}", c.p)])
        .collect();
    input.tsv("regression.tsv", &["term", "estimate", "std_error", "t", "p"], &rows)?;
    let mut summary = vec![
        vec!["n".to_string(), result.n.to_string()],
        vec!["df_residual".into(), result.df_residual.to_string()],
        vec!["r_squared".into(), f(result.r_squared)],
        vec!["residual_std_error".into(), f(result.residual_std_error)],
    ];
    summary.extend(result.reference_levels.iter().map(|(k, v)| vec![format!("reference: {k}"), v.clone()]));
    input.tsv("regression_summary.tsv", &["statistic", "value"], &summary)
}

fn matched_diff(input: &Input) -> Result<()> {
    let diffs = matched_same_appraisal_diff(&input.records, &input.profiles());
    let rows: Vec<Vec<String>> = diffs
        .iter()
        .map(|d| {
            vec![
                d.label.to_string(),
                f(d.professional.mean),
                f(d.professional.se),
                d.professional.n.to_string(),
                f(d.layperson.mean),
                f(d.layperson.se),
                d.layperson.n.to_string(),
                f(d.difference),
            ]
        })
        .collect();
    let header = [
        "label",
        "professional_mean",
        "professional_se",
        "professional_n",
        "layperson_mean",
        "layperson_se",
        "layperson_n",
        "difference",
    ];
    input.tsv("matched_diff.tsv", &header, &rows)
}

fn experience(input: &Input, variance: Variance) -> Result<()> {
    let rows: Vec<Vec<String>> = experience_comparison(&input.records, &input.profiles(), variance)
        .iter()
        .map(|r| {
            let (t, df, p) =
                r.test.map_or((String::new(), String::new(), String::new()), |t| (f(t.t), f(t.df), format!("{:.3e}", t.p)));
            vec![
                r.profession.to_string(),
                r.authors.to_string(),
                f(r.student.mean),
                f(r.student.se),
                r.student.n.to_string(),
                f(r.licensed.mean),
                f(r.licensed.se),
                r.licensed.n.to_string(),
                t,
                df,
                p,
            ]
        })
        .collect();
    let header = [
        "profession",
        "authors",
        "student_mean",
        "student_se",
        "student_n",
        "licensed_mean",
        "licensed_se",
        "licensed_n",
        "t",
        "df",
        "p",
    ];
    input.tsv("experience.tsv", &header, &rows)
}

fn flair_levels(input: &Input, levels: &[String], subreddit: &str, unit: MeanUnit) -> Result<()> {
    let groups = flair_level_groups(&input.records, subreddit, levels);
    let means = group_mean_alignment(&input.records, &groups, Some(levels), unit);
    input.tsv("flair_levels.tsv", &MEAN_HEADER, &means.iter().map(mean_row).collect::<Vec<_>>())?;
    input.svg(
        "flair_levels.svg",
        bar_chart_svg(&format!("Mean alignment by flair level in {subreddit}"), &means, "percent alignment"),
    )
}

fn rate_files(input: &Input, stem: &str, table: &RateTable) -> Result<()> {
    let header = ["group", "numerator", "denominator", "rate"];
    let rows = |v: &[aloe_core::analysis::GroupRate]| -> Vec<Vec<String>> {
        v.iter().map(|r| vec![r.group.clone(), r.numerator.to_string(), r.denominator.to_string(), f(r.rate)]).collect()
    };
    input.tsv(&format!("{stem}.tsv"), &header, &rows(&table.rows))?;
    input.tsv(&format!("{stem}_top.tsv"), &header, &rows(&table.top))?;
    input.tsv(&format!("{stem}_bottom.tsv"), &header, &rows(&table.bottom))
}

fn rates(input: &Input, k: usize) -> Result<()> {
    let by_subreddit = |r: &AlignmentRecord| Some(r.subreddit.clone());
    let advice = group_conditional_rate(&input.records, observer_gives_advice, any_link, by_subreddit, k);
    rate_files(input, "advice_rates", &advice)?;
    let mismatch = group_conditional_rate(&input.records, labels_differ, any_link, by_subreddit, k);
    rate_files(input, "mismatch_rates", &mismatch)
}
