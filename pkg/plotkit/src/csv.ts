/**
 * Strict parser for the simulator's metrics.csv.
 *
 * Schema: header `scenario,variant,subject,metric,value,unit`, one numeric
 * value per row. Anything else is a hard error - these files are machine
 * written, so leniency would only hide producer bugs.
 */

import { readFileSync } from 'fs'

export interface MetricRow {
  scenario: string
  variant: string
  subject: string
  metric: string
  value: number
  unit: string
}

export const HEADER = 'scenario,variant,subject,metric,value,unit'

export class CsvError extends Error {}

export class MissingMetricError extends Error {
  constructor(readonly metric: string, readonly variant: string, readonly subject?: string) {
    super(
      subject === undefined
        ? `metric ${metric} missing for variant ${variant}`
        : `metric ${metric} missing for variant ${variant}, subject ${subject}`,
    )
  }
}

export function parseMetricsCsv(text: string, source = '<csv>'): MetricRow[] {
  const lines = text.split('\n').filter((l) => l.length > 0)
  if (lines.length === 0) {
    throw new CsvError(`${source}: empty CSV`)
  }
  if (lines[0] !== HEADER) {
    throw new CsvError(`${source}: bad header ${JSON.stringify(lines[0])}`)
  }
  if (lines.length === 1) {
    throw new CsvError(`${source}: header only, no metric rows`)
  }
  const rows: MetricRow[] = []
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(',')
    if (parts.length !== 6) {
      throw new CsvError(`${source}:${i + 1}: expected 6 fields, got ${parts.length}`)
    }
    const value = Number(parts[4])
    if (!Number.isFinite(value)) {
      throw new CsvError(`${source}:${i + 1}: non-numeric value ${JSON.stringify(parts[4])}`)
    }
    rows.push({
      scenario: parts[0],
      variant: parts[1],
      subject: parts[2],
      metric: parts[3],
      value,
      unit: parts[5],
    })
  }
  return rows
}

export function loadMetricsCsv(path: string): MetricRow[] {
  return parseMetricsCsv(readFileSync(path, 'utf-8'), path)
}

export function variants(rows: MetricRow[]): string[] {
  return [...new Set(rows.map((r) => r.variant))].sort()
}

export function subjects(rows: MetricRow[], prefix: string): string[] {
  return [...new Set(rows.filter((r) => r.subject.startsWith(prefix)).map((r) => r.subject))].sort()
}

/** Exact lookup; absence is an error that names what was missing. */
export function metricValue(
  rows: MetricRow[],
  variant: string,
  subject: string,
  metric: string,
): number {
  const hit = rows.find(
    (r) => r.variant === variant && r.subject === subject && r.metric === metric,
  )
  if (hit === undefined) {
    throw new MissingMetricError(metric, variant, subject)
  }
  return hit.value
}
