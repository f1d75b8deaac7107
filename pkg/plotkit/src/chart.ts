/**
 * Data shaping: metrics.csv rows -> grouped-bar chart models.
 *
 * Three chart kinds mirror the simulator's study layout:
 *  - interference-bars: one group per task, one bar per variant, default
 *    normalization ratio-to-isolated (so the isolated bar is 1.0);
 *  - amr-modes: one bar per variant of the lockstep scenario, annotated
 *    with detection/recovery counts;
 *  - bound-vs-measured: per regulated initiator, the analytic latency
 *    bound next to the measured worst latency, per variant.
 */

import { MetricRow, MissingMetricError, metricValue, subjects, variants } from './csv.js'

export type ChartKind = 'interference-bars' | 'amr-modes' | 'bound-vs-measured'
export type Normalization = 'ratio-to-isolated' | 'absolute'

export interface Bar {
  label: string
  value: number
  annotation?: string
}

export interface BarGroup {
  title: string
  bars: Bar[]
}

export interface ChartModel {
  title: string
  valueAxis: string
  groups: BarGroup[]
}

const ISOLATED = 'isolated'

function orderedVariants(rows: MetricRow[]): string[] {
  // isolated leads, the rest alphabetical: stable and readable
  const vs = variants(rows)
  return [...vs.filter((v) => v === ISOLATED), ...vs.filter((v) => v !== ISOLATED)]
}

export function interferenceBars(
  rows: MetricRow[],
  metric = 'completion_cycles',
  normalization: Normalization = 'ratio-to-isolated',
): ChartModel {
  const tasks = subjects(rows, 'task:').filter((s) => {
    // skip pure background interferers (unmeasured: completion -1 everywhere)
    return rows.some((r) => r.subject === s && r.metric === metric && r.value >= 0)
  })
  if (tasks.length === 0) {
    throw new MissingMetricError(metric, '<any>', 'task:*')
  }
  const vs = orderedVariants(rows)
  const scenario = rows[0].scenario
  const groups: BarGroup[] = tasks.map((subject) => {
    const baseline =
      normalization === 'ratio-to-isolated' ? metricValue(rows, ISOLATED, subject, metric) : 1
    if (normalization === 'ratio-to-isolated' && baseline <= 0) {
      throw new MissingMetricError(metric, ISOLATED, subject)
    }
    const bars = vs.map((variant) => ({
      label: variant,
      value: metricValue(rows, variant, subject, metric) / baseline,
    }))
    return { title: subject.replace('task:', ''), bars }
  })
  const axis =
    normalization === 'ratio-to-isolated' ? `${metric} (ratio to isolated)` : metric
  return { title: `${scenario}: ${metric} per variant`, valueAxis: axis, groups }
}

export function amrModes(rows: MetricRow[], metric = 'completion_cycles'): ChartModel {
  const tasks = subjects(rows, 'task:')
  if (tasks.length === 0) {
    throw new MissingMetricError(metric, '<any>', 'task:*')
  }
  const subject = tasks[0]
  const vs = orderedVariants(rows).filter((v) => v !== ISOLATED)
  const scenario = rows[0].scenario
  const bars = vs.map((variant) => {
    const detections = metricValue(rows, variant, 'amr', 'detections')
    const recoveries = metricValue(rows, variant, 'amr', 'recoveries')
    const note =
      detections > 0 || recoveries > 0
        ? `${detections} detected / ${recoveries} recovered`
        : undefined
    return {
      label: variant,
      value: metricValue(rows, variant, subject, metric),
      annotation: note,
    }
  })
  return {
    title: `${scenario}: redundancy modes (${metric})`,
    valueAxis: `${metric} [cycles]`,
    groups: [{ title: subject.replace('task:', ''), bars }],
  }
}

export function boundVsMeasured(rows: MetricRow[]): ChartModel {
  const scenario = rows[0].scenario
  const vs = orderedVariants(rows)
  const groups: BarGroup[] = []
  for (const initiator of subjects(rows, 'initiator:')) {
    const name = initiator.replace('initiator:', '')
    for (const variant of vs) {
      const bound = rows.find(
        (r) => r.variant === variant && r.subject === initiator && r.metric === 'tru_latency_bound',
      )
      if (bound === undefined) continue // unregulated initiator in this variant
      const measured = metricValue(rows, variant, `task:${name}`, 'lat_max')
      groups.push({
        title: `${name} [${variant}]`,
        bars: [
          { label: 'bound', value: bound.value },
          { label: 'measured max', value: measured },
        ],
      })
    }
  }
  if (groups.length === 0) {
    throw new MissingMetricError('tru_latency_bound', '<any>')
  }
  return {
    title: `${scenario}: analytic latency bound vs measured`,
    valueAxis: 'cycles',
    groups,
  }
}

export function buildChart(
  kind: ChartKind,
  rows: MetricRow[],
  normalization: Normalization,
  metric?: string,
): ChartModel {
  switch (kind) {
    case 'interference-bars':
      return interferenceBars(rows, metric ?? 'completion_cycles', normalization)
    case 'amr-modes':
      return amrModes(rows, metric ?? 'completion_cycles')
    case 'bound-vs-measured':
      return boundVsMeasured(rows)
  }
}
