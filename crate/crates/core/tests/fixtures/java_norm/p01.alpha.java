public class Totals {
    public static void main(String[] argv) {
        /* reworked: add the three meter samples */
        int a = 14;
        int b = 28;
        int c = 35;
        int sum = a + b + c;
        System.out.println(sum);
    }
}
