#pragma once

namespace attack_table {

// The attack evaluation table, column for column.
struct TableRow {
  int level;
  const char* description;
  const char* cia;
  const char* stride;
  bool remote;
  bool local;
  const char* tool;
  const char* skill;
  const char* impact;
  const char* detection;
};

constexpr TableRow kTable[] = {
    {0, "Manipulate", "A", "TD", false, true, "---", "low", "high", "easy"},
    {0, "Physically Damage", "A", "TD", false, true, "---", "low", "high", "easy"},
    {1, "DoS Sensor", "A", "D", true, true, "hping3", "low", "high", "easy"},
    {1, "Disconnect IO power/network", "A", "TD", false, true, "---", "low", "high", "easy"},
    {1, "Manipulate IO physical", "A", "TD", false, true, "---", "low", "high", "easy"},
    {1, "MitM spoof values IO-PLC", "CIA", "STRIDE", false, true, "script", "high", "high", "medium"},
    {1, "DoS PLC", "A", "D", true, true, "hping3", "low", "high", "easy"},
    {1, "DoS HMI", "A", "D", true, true, "hping", "low", "medium", "easy"},
    {1, "Sniffing network", "C", "I", false, true, "Tcpdump", "low", "low", "difficult"},
    {1, "MitM spoof values HMI-PLC", "CIA", "STRIDE", false, true, "script", "high", "high", "medium"},
    {1, "Physical access HMI", "CIA", "STRIDE", false, true, "---", "low", "low", "medium"},
    {2, "DoS SCADA", "A", "D", true, true, "hping3", "high", "low", "easy"},
    {2, "Sniffing network", "C", "I", false, true, "Tcpdump", "low", "low", "difficult"},
    {2, "MitM spoof values SCADA-PLC", "CIA", "STRIDE", false, true, "script", "high", "high", "medium"},
    {2, "Attack SCADA", "CIA", "STRIDE", true, true, "script", "medium", "high", "medium"},
};

}  // namespace attack_table
