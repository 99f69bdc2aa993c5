#define PERIPH_BASE (0x40000000UL)
#define APB1PERIPH_BASE PERIPH_BASE

typedef enum {
  RTC_WKUP_IRQn = 3,
  RTC_Alarm_IRQn = 41,
} IRQn_Type;
