/**
 * PlotSpec -> SVG file: the one entry point the CLI and tests both use.
 */

import { mkdirSync, writeFileSync } from 'fs'
import { dirname } from 'path'

import { buildChart, ChartKind, Normalization } from './chart.js'
import { loadMetricsCsv, MetricRow } from './csv.js'
import { renderSvg } from './svg.js'

export interface PlotSpec {
  input: string
  kind: ChartKind
  output: string
  normalization?: Normalization
  metric?: string
}

export function renderChart(
  rows: MetricRow[],
  kind: ChartKind,
  normalization: Normalization = 'ratio-to-isolated',
  metric?: string,
): string {
  return renderSvg(buildChart(kind, rows, normalization, metric))
}

export function plot(spec: PlotSpec): string {
  const rows = loadMetricsCsv(spec.input)
  const content = renderChart(
    rows,
    spec.kind,
    spec.normalization ?? 'ratio-to-isolated',
    spec.metric,
  )
  mkdirSync(dirname(spec.output), { recursive: true })
  writeFileSync(spec.output, content)
  return spec.output
}
